#include "cornet/model.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "cornet/datagen.hpp"

namespace cornet {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value) {
    throw Error(ErrorCode::ConfigError, "invalid value for " + key + ": '" + value + "'");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v);
    return out;
}

double parse_f64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        double out = std::stod(v, &used);
        if (used != v.size() || !std::isfinite(out)) bad_value(key, v);
        return out;
    } catch (const std::logic_error&) {
        bad_value(key, v);
    }
}

MetricKind parse_metric_value(const std::string& key, const std::string& v) {
    auto m = parse_metric(v);
    if (!m) bad_value(key, v);
    return *m;
}

std::vector<CorrelationMatrix> channels_of(const TensorData& t, std::size_t sample) {
    const std::size_t ch = t.shape[1], n = t.shape[2];
    std::vector<CorrelationMatrix> out;
    for (std::size_t c = 0; c < ch; ++c) {
        DenseMatrix m(n, n);
        const double* src = t.data.data() + (sample * ch + c) * n * n;
        std::copy(src, src + n * n, m.data().begin());
        out.push_back(CorrelationMatrix::validated(std::move(m)));
    }
    return out;
}

std::size_t argmax(std::span<const double> v) {
    return std::size_t(std::max_element(v.begin(), v.end()) - v.begin());
}

Var network(Tape& t, const Model& m, std::span<const CorrelationMatrix> x, ParamVars cv, ParamVars mv,
            const SolverOptions& o) {
    Var in = stack_leaf(t, x);
    Var h = conv_forward(t, in, m.conv, cv, o);
    if (m.cfg.activation == Activation::TangentRelu) h = tangent_relu_forward(t, h, m.cfg.conv_metric, o);
    return mlr_forward(t, h, m.mlr, mv, o);
}

}  // namespace

// ---- config ----------------------------------------------------------------------

SolverOptions RunConfig::solver() const {
    return {dplus_tol, dplus_max_iter, dstar_mode, dstar_tol, dstar_max_iter};
}

void RunConfig::validate() const {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::ConfigError, what); };
    if (n_in < 2 || m_hidden < 2) fail("matrix sizes must be at least 2");
    if (channels == 0 || field_size == 0 || stride == 0 || kernels == 0) fail("counts must be positive");
    if (classes < 2) fail("need at least 2 classes");
    if (field_size > channels) fail("field_size exceeds channels");
    if ((channels - field_size) % stride != 0) fail("receptive fields do not tile the channels");
    if (batch_size == 0) fail("batch_size must be positive");
    if (!(lr > 0)) fail("lr must be positive");
    if (!(weight_decay >= 0)) fail("weight_decay must be non-negative");
    if (!(power > 0)) fail("power must be positive");
    if (!(dplus_tol > 0) || !(dstar_tol > 0) || dplus_max_iter <= 0 || dstar_max_iter <= 0)
        fail("solver tolerances and iteration limits must be positive");
}

std::string RunConfig::to_text() const {
    std::ostringstream o;
    o << "conv_metric = " << metric_name(conv_metric) << "\n"
      << "mlr_metric = " << metric_name(mlr_metric) << "\n"
      << "n_in = " << n_in << "\n"
      << "channels = " << channels << "\n"
      << "field_size = " << field_size << "\n"
      << "stride = " << stride << "\n"
      << "kernels = " << kernels << "\n"
      << "m_hidden = " << m_hidden << "\n"
      << "classes = " << classes << "\n"
      << "power = " << fmt_double(power) << "\n"
      << "optimizer = " << (optimizer == OptimizerKind::Adam ? "adam" : "sgd") << "\n"
      << "lr = " << fmt_double(lr) << "\n"
      << "weight_decay = " << fmt_double(weight_decay) << "\n"
      << "epochs = " << epochs << "\n"
      << "batch_size = " << batch_size << "\n"
      << "seed = " << seed << "\n"
      << "dplus_tol = " << fmt_double(dplus_tol) << "\n"
      << "dplus_max_iter = " << dplus_max_iter << "\n"
      << "dstar_mode = " << (dstar_mode == DstarMode::Full ? "full" : "newton1") << "\n"
      << "dstar_tol = " << fmt_double(dstar_tol) << "\n"
      << "dstar_max_iter = " << dstar_max_iter << "\n"
      << "activation = " << (activation == Activation::None ? "none" : "tangent_relu") << "\n";
    return o.str();
}

RunConfig parse_config(const KeyValues& kv) {
    RunConfig c;
    // `metric` sets both layers; the specific keys override it.
    if (auto it = kv.find("metric"); it != kv.end())
        c.conv_metric = c.mlr_metric = parse_metric_value(it->first, it->second);
    for (const auto& [k, v] : kv) {
        auto count = [&] { return std::size_t(parse_u64(k, v)); };
        auto iters = [&] {
            auto x = parse_u64(k, v);
            if (x > 1000000) bad_value(k, v);
            return int(x);
        };
        if (k == "metric") continue;
        else if (k == "conv_metric") c.conv_metric = parse_metric_value(k, v);
        else if (k == "mlr_metric") c.mlr_metric = parse_metric_value(k, v);
        else if (k == "n_in") c.n_in = count();
        else if (k == "channels") c.channels = count();
        else if (k == "field_size") c.field_size = count();
        else if (k == "stride") c.stride = count();
        else if (k == "kernels") c.kernels = count();
        else if (k == "m_hidden") c.m_hidden = count();
        else if (k == "classes") c.classes = count();
        else if (k == "power") c.power = parse_f64(k, v);
        else if (k == "optimizer") {
            if (v == "adam") c.optimizer = OptimizerKind::Adam;
            else if (v == "sgd") c.optimizer = OptimizerKind::Sgd;
            else bad_value(k, v);
        } else if (k == "lr") c.lr = parse_f64(k, v);
        else if (k == "weight_decay") c.weight_decay = parse_f64(k, v);
        else if (k == "epochs") c.epochs = count();
        else if (k == "batch_size") c.batch_size = count();
        else if (k == "seed") c.seed = parse_u64(k, v);
        else if (k == "dplus_tol") c.dplus_tol = parse_f64(k, v);
        else if (k == "dplus_max_iter") c.dplus_max_iter = iters();
        else if (k == "dstar_mode") {
            if (v == "full") c.dstar_mode = DstarMode::Full;
            else if (v == "newton1") c.dstar_mode = DstarMode::Newton1;
            else bad_value(k, v);
        } else if (k == "dstar_tol") c.dstar_tol = parse_f64(k, v);
        else if (k == "dstar_max_iter") c.dstar_max_iter = iters();
        else if (k == "activation") {
            if (v == "none") c.activation = Activation::None;
            else if (v == "tangent_relu") c.activation = Activation::TangentRelu;
            else bad_value(k, v);
        } else {
            throw Error(ErrorCode::ConfigError, "unknown config key: " + k);
        }
    }
    c.validate();
    return c;
}

RunConfig parse_config(const std::string& text) { return parse_config(parse_key_values(text)); }

RunConfig load_config(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    return parse_config(std::string(bytes.begin(), bytes.end()));
}

// ---- data ------------------------------------------------------------------------

std::size_t Dataset::num_classes() const {
    return labels.empty() ? 0 : std::size_t(*std::max_element(labels.begin(), labels.end())) + 1;
}

void write_dataset(const std::filesystem::path& dir, const Dataset& d) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
    if (d.labels.size() != d.samples.size()) throw Error(ErrorCode::ShapeMismatch, "labels do not match samples");
    TensorData t;
    t.shape = {std::uint32_t(d.size()), std::uint32_t(d.channels), std::uint32_t(d.n), std::uint32_t(d.n)};
    t.data.reserve(t.numel());
    for (const auto& s : d.samples) {
        if (s.size() != d.channels) throw Error(ErrorCode::ShapeMismatch, "sample channel count differs");
        for (const auto& c : s) {
            if (c.dim() != d.n) throw Error(ErrorCode::ShapeMismatch, "sample size differs");
            auto v = c.matrix().data();
            t.data.insert(t.data.end(), v.begin(), v.end());
        }
    }
    write_tensor(dir / "samples.cort", t);
    write_labels(dir / "labels.corl", d.labels);
}

Dataset read_dataset(const std::filesystem::path& dir) {
    TensorData t = read_tensor(dir / "samples.cort");
    if (t.shape.size() != 4 || t.shape[2] != t.shape[3])
        throw Error(ErrorCode::IoError, "samples.cort must have shape [N, ch, n, n]");
    Dataset d;
    d.channels = t.shape[1];
    d.n = t.shape[2];
    d.labels = read_labels(dir / "labels.corl");
    if (d.labels.size() != t.shape[0]) throw Error(ErrorCode::IoError, "label count does not match the samples");
    for (std::size_t i = 0; i < t.shape[0]; ++i) d.samples.push_back(channels_of(t, i));
    return d;
}

// ---- model -----------------------------------------------------------------------

Model Model::init(const RunConfig& cfg) {
    cfg.validate();
    std::mt19937_64 rng(cfg.seed);
    Model m;
    m.cfg = cfg;
    m.conv.fc = FcParams::init(cfg.conv_metric, cfg.n_in, cfg.m_hidden, cfg.field_size, cfg.kernels, rng);
    m.conv.stride = cfg.stride;
    m.mlr = MlrParams::init(cfg.mlr_metric, cfg.m_hidden, m.conv_outputs(), cfg.classes, rng);
    return m;
}

std::vector<DenseMatrix*> Model::blocks() { return {&conv.fc.z, &conv.fc.gamma, &mlr.z, &mlr.gamma}; }

std::vector<const DenseMatrix*> Model::blocks() const { return {&conv.fc.z, &conv.fc.gamma, &mlr.z, &mlr.gamma}; }

const std::vector<std::string>& Model::block_names() {
    static const std::vector<std::string> names{"conv_z", "conv_gamma", "mlr_z", "mlr_gamma"};
    return names;
}

std::vector<CorrelationMatrix> preprocess(const RunConfig& cfg, std::span<const CorrelationMatrix> x) {
    if (x.size() != cfg.channels) throw Error(ErrorCode::ShapeMismatch, "sample channel count does not match config");
    std::vector<CorrelationMatrix> out;
    for (const auto& c : x) {
        if (c.dim() != cfg.n_in) throw Error(ErrorCode::ShapeMismatch, "sample size does not match config");
        out.push_back(cfg.power == 1.0 ? c : power_correlation(c, cfg.power));
    }
    return out;
}

std::vector<double> model_logits(const Model& m, std::span<const CorrelationMatrix> x) {
    Tape t;
    Var out = network(t, m, x, {t.leaf(m.conv.fc.z), t.leaf(m.conv.fc.gamma)}, {t.leaf(m.mlr.z), t.leaf(m.mlr.gamma)},
                      m.cfg.solver());
    return t.value(out);
}

BatchResult forward_backward(const Model& m, std::span<const std::vector<CorrelationMatrix>> xs,
                             std::span<const std::uint32_t> labels) {
    if (xs.size() != labels.size() || xs.empty()) throw Error(ErrorCode::ShapeMismatch, "bad batch");
    BatchResult r;
    for (const DenseMatrix* b : m.blocks()) r.grads.emplace_back(b->rows(), b->cols());
    const double scale = 1.0 / double(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        Tape t;
        ParamVars cv{t.leaf(m.conv.fc.z, true), t.leaf(m.conv.fc.gamma, true)};
        ParamVars mv{t.leaf(m.mlr.z, true), t.leaf(m.mlr.gamma, true)};
        Var logits = network(t, m, xs[i], cv, mv, m.cfg.solver());
        Var loss = softmax_xent(t, logits, labels[i]);
        r.loss += scale * t.value(loss)[0];
        if (argmax(t.value(logits)) == labels[i]) ++r.correct;
        t.backward(loss, scale);
        const Var leaves[] = {cv.z, cv.gamma, mv.z, mv.gamma};
        for (std::size_t b = 0; b < 4; ++b) {
            const auto& g = t.grad(leaves[b]);
            if (g.empty()) continue;
            auto dst = r.grads[b].data();
            for (std::size_t k = 0; k < g.size(); ++k) dst[k] += g[k];
        }
    }
    return r;
}

EvalResult evaluate(const Model& m, const Dataset& d) {
    const std::size_t k = m.cfg.classes;
    EvalResult r;
    r.confusion.assign(k, std::vector<std::size_t>(k, 0));
    if (d.size() == 0) return r;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        if (d.labels[i] >= k) throw Error(ErrorCode::ShapeMismatch, "label exceeds the configured class count");
        auto logits = model_logits(m, preprocess(m.cfg, d.samples[i]));
        r.loss += softmax_xent(logits, d.labels[i]).loss;
        const std::size_t pred = argmax(logits);
        ++r.confusion[d.labels[i]][pred];
        if (pred == d.labels[i]) ++correct;
    }
    r.loss /= double(d.size());
    r.accuracy = double(correct) / double(d.size());
    return r;
}

// ---- optimisation --------------------------------------------------------------------

void Optimizer::step(Model& m, const std::vector<DenseMatrix>& grads) {
    auto blocks = m.blocks();
    if (grads.size() != blocks.size()) throw Error(ErrorCode::ShapeMismatch, "gradient blocks do not match the model");
    if (m1_.empty())
        for (auto* b : blocks) {
            m1_.emplace_back(b->rows(), b->cols());
            m2_.emplace_back(b->rows(), b->cols());
        }
    ++t_;
    const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    const double c1 = 1.0 - std::pow(b1, double(t_)), c2 = 1.0 - std::pow(b2, double(t_));
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        auto p = blocks[b]->data();
        auto g = grads[b].data();
        auto mm = m1_[b].data();
        auto vv = m2_[b].data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double gi = g[i] + cfg_.weight_decay * p[i];
            if (cfg_.optimizer == OptimizerKind::Sgd) {
                p[i] -= cfg_.lr * gi;
                continue;
            }
            mm[i] = b1 * mm[i] + (1 - b1) * gi;
            vv[i] = b2 * vv[i] + (1 - b2) * gi * gi;
            p[i] -= cfg_.lr * (mm[i] / c1) / (std::sqrt(vv[i] / c2) + eps);
        }
    }
}

std::vector<EpochMetrics> train(Model& m, const Dataset& d, const EpochCallback& cb) {
    if (d.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty dataset");
    std::vector<std::vector<CorrelationMatrix>> xs;
    for (const auto& s : d.samples) xs.push_back(preprocess(m.cfg, s));
    for (auto l : d.labels)
        if (l >= m.cfg.classes) throw Error(ErrorCode::ConfigError, "label exceeds the configured class count");

    Optimizer opt(m.cfg);
    std::mt19937_64 rng(m.cfg.seed ^ 0x9e3779b97f4a7c15ull);
    std::vector<std::size_t> order(d.size());
    std::vector<EpochMetrics> log;
    for (std::size_t epoch = 1; epoch <= m.cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
        std::size_t batch = 0;
        for (std::size_t s = 0; s < order.size(); s += m.cfg.batch_size, ++batch) {
            const std::size_t e = std::min(order.size(), s + m.cfg.batch_size);
            std::vector<std::vector<CorrelationMatrix>> bx;
            std::vector<std::uint32_t> by;
            for (std::size_t i = s; i < e; ++i) {
                bx.push_back(xs[order[i]]);
                by.push_back(d.labels[order[i]]);
            }
            try {
                opt.step(m, forward_backward(m, bx, by).grads);
            } catch (const Error& err) {
                throw Error(err.code(), "epoch " + std::to_string(epoch) + " batch " + std::to_string(batch) + ": " +
                                            err.what());
            }
        }
        EvalResult ev;
        try {
            ev = evaluate(m, d);
        } catch (const Error& err) {
            throw Error(err.code(), "epoch " + std::to_string(epoch) + " evaluation: " + err.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        log.push_back({epoch, ev.loss, ev.accuracy, secs});
        if (cb && !cb(log.back())) break;
    }
    return log;
}

// ---- checkpoints ----------------------------------------------------------------

void save_checkpoint(const std::filesystem::path& dir, const Model& m) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
    std::ostringstream man;
    man << "format = cornet-checkpoint 1\n" << m.cfg.to_text();
    auto blocks = m.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& name = Model::block_names()[b];
        man << "tensor = " << name << " " << blocks[b]->rows() << " " << blocks[b]->cols() << "\n";
        write_tensor(dir / (name + ".cort"), tensor_of(*blocks[b]));
    }
    const std::string s = man.str();
    write_bytes(dir / "manifest", std::vector<std::uint8_t>(s.begin(), s.end()));
}

Model load_checkpoint(const std::filesystem::path& dir) {
    const auto bytes = read_bytes(dir / "manifest");
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::string line, config_text;
    std::map<std::string, std::pair<std::size_t, std::size_t>> shapes;
    bool format_ok = false;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        const std::string key = line.substr(0, line.find_first_of(" =")), value = eq == std::string::npos ? "" : line.substr(eq + 1);
        if (key == "tensor") {
            std::istringstream ts(value);
            std::string name;
            std::size_t r = 0, c = 0;
            if (!(ts >> name >> r >> c)) throw Error(ErrorCode::IoError, "bad tensor line in manifest");
            shapes[name] = {r, c};
        } else if (key == "format") {
            format_ok = value.find("cornet-checkpoint 1") != std::string::npos;
        } else {
            config_text += line + "\n";
        }
    }
    if (!format_ok) throw Error(ErrorCode::IoError, "not a checkpoint manifest: " + dir.string());
    Model m = Model::init(parse_config(config_text));
    auto blocks = m.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const auto& name = Model::block_names()[b];
        auto it = shapes.find(name);
        if (it == shapes.end()) throw Error(ErrorCode::IoError, "manifest lacks tensor " + name);
        DenseMatrix v = matrix_of(read_tensor(dir / (name + ".cort")));
        if (v.rows() != blocks[b]->rows() || v.cols() != blocks[b]->cols() || it->second.first != v.rows() ||
            it->second.second != v.cols())
            throw Error(ErrorCode::IoError, "tensor " + name + " has the wrong shape");
        *blocks[b] = std::move(v);
    }
    return m;
}

void append_metrics(const std::filesystem::path& csv, const EpochMetrics& e) {
    const bool fresh = !std::filesystem::exists(csv);
    std::ofstream f(csv, std::ios::app);
    if (!f) throw Error(ErrorCode::IoError, "cannot append to " + csv.string());
    if (fresh) f << "epoch,loss,acc,seconds\n";
    f << e.epoch << ',' << fmt_double(e.loss) << ',' << fmt_double(e.acc) << ',' << fmt_double(e.seconds) << '\n';
    if (!f) throw Error(ErrorCode::IoError, "write failed for " + csv.string());
}

// ---- gradient check -----------------------------------------------------------------

double GradcheckResult::max_rel_error() const {
    double e = 0.0;
    for (const auto& b : blocks) e = std::max(e, b.rel_error);
    return e;
}

GradcheckResult gradcheck(const RunConfig& cfg_in, std::uint64_t seed, double h) {
    RunConfig cfg = cfg_in;
    cfg.seed = seed;
    cfg.dplus_tol = 1e-13;
    cfg.dplus_max_iter = std::max(cfg.dplus_max_iter, 200);
    cfg.dstar_tol = 1e-13;
    cfg.dstar_max_iter = std::max(cfg.dstar_max_iter, 100);
    Model m = Model::init(cfg);
    std::mt19937_64 rng(seed + 1);
    std::normal_distribution<double> jitter(0.0, 0.1);
    for (auto& g : m.conv.fc.gamma.data()) g += jitter(rng);
    for (auto& g : m.mlr.gamma.data()) g += jitter(rng);

    DatagenParams dp;
    dp.classes = cfg.classes;
    dp.per_class = 1;
    dp.dim = cfg.n_in;
    dp.channels = cfg.channels;
    dp.sep = 0.5;
    dp.seed = seed;
    Dataset d = generate_dataset(dp);
    std::vector<std::vector<CorrelationMatrix>> xs;
    std::vector<std::uint32_t> ys;
    for (std::size_t i = 0; i < std::min<std::size_t>(d.size(), 4); ++i) {
        xs.push_back(preprocess(cfg, d.samples[i]));
        ys.push_back(d.labels[i]);
    }

    auto loss = [&](const Model& mm) {
        double l = 0.0;
        for (std::size_t i = 0; i < xs.size(); ++i) l += softmax_xent(model_logits(mm, xs[i]), ys[i]).loss;
        return l / double(xs.size());
    };

    const BatchResult an = forward_backward(m, xs, ys);
    GradcheckResult r;
    auto blocks = m.blocks();
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        auto p = blocks[b]->data();
        auto a = an.grads[b].data();
        double diff = 0.0, na = 0.0, nf = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double keep = p[i];
            p[i] = keep + h;
            const double lp = loss(m);
            p[i] = keep - h;
            const double lm = loss(m);
            p[i] = keep;
            const double fd = (lp - lm) / (2 * h);
            diff += (a[i] - fd) * (a[i] - fd);
            na += a[i] * a[i];
            nf += fd * fd;
        }
        const double denom = std::max({std::sqrt(na), std::sqrt(nf), 1e-12});
        r.blocks.push_back({Model::block_names()[b], p.size(), std::sqrt(diff) / denom});
    }
    return r;
}

}  // namespace cornet
