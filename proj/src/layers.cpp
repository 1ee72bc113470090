#include "cornet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

namespace cornet {

namespace {

DenseMatrix square_from(std::span<const double> v, std::size_t n) {
    DenseMatrix m(n, n);
    std::copy(v.begin(), v.begin() + n * n, m.data().begin());
    return m;
}

DenseMatrix zero_diag(DenseMatrix g) {
    for (std::size_t i = 0; i < g.rows(); ++i) g(i, i) = 0.0;
    return g;
}

std::size_t stack_dim(const Tape& t, Var stack) {
    const auto& s = t.shape(stack);
    if (s.size() != 3 || s[1] != s[2]) throw Error(ErrorCode::ShapeMismatch, "expected a [channels, n, n] stack");
    return s[1];
}

void require_cols(const Tape& t, Var v, std::size_t rows, std::size_t cols, const char* what) {
    const auto& s = t.shape(v);
    if (s.size() != 2 || s[0] != rows || s[1] != cols)
        throw Error(ErrorCode::ShapeMismatch, std::string(what) + " has the wrong shape");
}

double dotp(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void features_adjoint(MetricKind metric, std::size_t n, std::span<const double> g, DenseMatrix& gp) {
    auto pairs = lower_pairs(n);
    for (std::size_t s = 0; s < pairs.size(); ++s) {
        auto [i, j] = pairs[s];
        switch (metric) {
            case MetricKind::ECM:
            case MetricKind::LECM: gp(i, j) += g[s]; break;
            case MetricKind::OLM:
                gp(i, j) += g[s];
                gp(j, i) += g[s];
                break;
            case MetricKind::LSM:
                gp(i, j) += g[s];
                gp(j, i) += g[s];
                gp(i, i) -= g[s];
                gp(j, j) -= g[s];
                break;
            case MetricKind::PHCM: throw Error(ErrorCode::Unsupported, "PHCM has no flat features");
        }
    }
}

std::vector<Vec> split_parts(std::span<const double> x, std::span<const std::size_t> dims) {
    std::vector<Vec> out;
    std::size_t off = 0;
    for (std::size_t d : dims) {
        out.emplace_back(x.begin() + off, x.begin() + off + d);
        off += d;
    }
    return out;
}

std::size_t dims_total(std::span<const std::size_t> dims) {
    std::size_t n = 0;
    for (std::size_t d : dims) n += d;
    return n;
}

Var stack_result(Tape& t, std::vector<double> value, std::size_t k, std::size_t m, std::vector<Var> inputs,
                 Tape::Backward bw) {
    return t.record(std::move(value), {k, m, m}, std::move(inputs), std::move(bw));
}

std::vector<CorrelationMatrix> unstack(const Tape& t, Var v) {
    std::vector<CorrelationMatrix> out;
    for (std::size_t k = 0; k < t.shape(v)[0]; ++k) out.push_back(CorrelationMatrix::trusted(t.channel(v, k)));
    return out;
}

std::size_t gamma_cols(MetricKind metric, std::size_t channels) { return is_log_euclidean(metric) ? channels : 1; }

void init_normal(DenseMatrix& z, std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / double(n * (n - 1))));
    for (auto& v : z.data()) v = nd(rng);
}

// FC from a per-channel representation (features or concatenated parts) of `channels` inputs.
Var fc_from_repr(Tape& t, Var repr, const FcParams& p, ParamVars pv, const SolverOptions& opts) {
    if (is_log_euclidean(p.metric)) {
        Var v = le_slot_logits(t, p.metric, p.n, repr, pv.z, pv.gamma);
        return le_from_coords(t, p.metric, p.m, v, opts);
    }
    Var x = beta_concat_op(t, repr, ppb_dims(p.n, p.channels));
    Var y = pb_fc_out(t, pb_logits(t, x, pv.z, pv.gamma));
    Var parts = beta_split_op(t, y, ppb_dims(p.m, p.kernels));
    return parts_to_cor(t, parts, p.kernels, p.m);
}

Var channel_repr(Tape& t, MetricKind metric, Var stack, const SolverOptions& opts) {
    return is_log_euclidean(metric) ? le_features(t, metric, stack, opts) : cor_to_parts(t, stack);
}

}  // namespace

std::vector<std::pair<std::size_t, std::size_t>> lower_pairs(std::size_t n) {
    std::vector<std::pair<std::size_t, std::size_t>> p;
    p.reserve(lower_count(n));
    for (std::size_t i = 1; i < n; ++i)
        for (std::size_t j = 0; j < i; ++j) p.emplace_back(i, j);
    return p;
}

double le_normal_norm(MetricKind metric, std::size_t n, std::span<const double> z, double* grad) {
    if (z.size() != lower_count(n)) throw Error(ErrorCode::ShapeMismatch, "normal has the wrong number of entries");
    double zz = 0.0;
    for (double v : z) zz += v * v;
    double norm = 0.0;
    std::vector<double> r;
    switch (metric) {
        case MetricKind::ECM:
        case MetricKind::LECM: norm = std::sqrt(zz); break;
        case MetricKind::OLM: norm = std::sqrt(2.0 * zz); break;
        case MetricKind::LSM: {
            r.assign(n, 0.0);
            auto pairs = lower_pairs(n);
            for (std::size_t s = 0; s < pairs.size(); ++s) {
                r[pairs[s].first] += z[s];
                r[pairs[s].second] += z[s];
            }
            double rr = 0.0;
            for (double v : r) rr += v * v;
            norm = std::sqrt(2.0 * zz + rr);
            break;
        }
        case MetricKind::PHCM: throw Error(ErrorCode::Unsupported, "PHCM has no flat normal");
    }
    if (grad) {
        if (norm == 0.0) {
            std::fill(grad, grad + z.size(), 0.0);
        } else if (metric == MetricKind::LSM) {
            auto pairs = lower_pairs(n);
            for (std::size_t s = 0; s < pairs.size(); ++s)
                grad[s] = (2.0 * z[s] + r[pairs[s].first] + r[pairs[s].second]) / norm;
        } else {
            const double c = metric == MetricKind::OLM ? 2.0 : 1.0;
            for (std::size_t s = 0; s < z.size(); ++s) grad[s] = c * z[s] / norm;
        }
    }
    return norm;
}

std::vector<double> le_features_of(MetricKind metric, const DenseMatrix& p) {
    auto pairs = lower_pairs(p.rows());
    std::vector<double> f(pairs.size());
    for (std::size_t s = 0; s < pairs.size(); ++s) {
        auto [i, j] = pairs[s];
        switch (metric) {
            case MetricKind::ECM:
            case MetricKind::LECM: f[s] = p(i, j); break;
            case MetricKind::OLM: f[s] = p(i, j) + p(j, i); break;
            case MetricKind::LSM: f[s] = p(i, j) + p(j, i) - p(i, i) - p(j, j); break;
            case MetricKind::PHCM: throw Error(ErrorCode::Unsupported, "PHCM has no flat features");
        }
    }
    return f;
}

// ---- parameter containers -----------------------------------------------------

MlrParams MlrParams::zeros(MetricKind metric, std::size_t n, std::size_t channels, std::size_t classes) {
    if (n < 2 || channels == 0 || classes == 0) throw Error(ErrorCode::InvalidDimension, "MLR needs n >= 2");
    MlrParams p;
    p.metric = metric;
    p.n = n;
    p.channels = channels;
    p.classes = classes;
    p.z = DenseMatrix(classes, channels * lower_count(n));
    p.gamma = DenseMatrix(classes, gamma_cols(metric, channels));
    return p;
}

MlrParams MlrParams::init(MetricKind metric, std::size_t n, std::size_t channels, std::size_t classes,
                          std::mt19937_64& rng) {
    MlrParams p = zeros(metric, n, channels, classes);
    init_normal(p.z, n, rng);
    return p;
}

void MlrParams::check() const {
    if (z.rows() != classes || z.cols() != channels * lower_count(n) || gamma.rows() != classes ||
        gamma.cols() != gamma_cols(metric, channels))
        throw Error(ErrorCode::ShapeMismatch, "MLR parameter shapes do not match the layer");
}

FcParams FcParams::zeros(MetricKind metric, std::size_t n, std::size_t m, std::size_t channels, std::size_t kernels) {
    if (n < 2 || m < 2 || channels == 0 || kernels == 0) throw Error(ErrorCode::InvalidDimension, "FC needs n, m >= 2");
    FcParams p;
    p.metric = metric;
    p.n = n;
    p.m = m;
    p.channels = channels;
    p.kernels = kernels;
    p.z = DenseMatrix(kernels * p.slots(), channels * lower_count(n));
    p.gamma = DenseMatrix(kernels * p.slots(), gamma_cols(metric, channels));
    return p;
}

FcParams FcParams::init(MetricKind metric, std::size_t n, std::size_t m, std::size_t channels, std::size_t kernels,
                        std::mt19937_64& rng) {
    FcParams p = zeros(metric, n, m, channels, kernels);
    // std (2 * in * out)^{-1/2}
    std::normal_distribution<double> nd(0.0, 1.0 / std::sqrt(2.0 * double(p.z.rows() * p.z.cols())));
    for (auto& v : p.z.data()) v = nd(rng);
    return p;
}

void FcParams::check() const {
    if (z.rows() != kernels * slots() || z.cols() != channels * lower_count(n) || gamma.rows() != z.rows() ||
        gamma.cols() != gamma_cols(metric, channels))
        throw Error(ErrorCode::ShapeMismatch, "FC parameter shapes do not match the layer");
}

std::size_t ConvParams::fields(std::size_t in_channels) const {
    const std::size_t f = field_size();
    if (stride == 0 || f == 0 || f > in_channels || (in_channels - f) % stride != 0)
        throw Error(ErrorCode::ShapeMismatch, "receptive fields do not tile the input channels");
    return (in_channels - f) / stride + 1;
}

// ---- generic tape ops ------------------------------------------------------------

Var stack_leaf(Tape& t, std::span<const CorrelationMatrix> cs) {
    if (cs.empty()) throw Error(ErrorCode::InvalidDimension, "empty channel list");
    const std::size_t n = cs[0].dim();
    std::vector<double> v;
    v.reserve(cs.size() * n * n);
    for (const auto& c : cs) {
        if (c.dim() != n) throw Error(ErrorCode::ShapeMismatch, "channels differ in size");
        v.insert(v.end(), c.matrix().storage().begin(), c.matrix().storage().end());
    }
    return t.leaf(std::move(v), {cs.size(), n, n});
}

Var slice(Tape& t, Var x, std::size_t offset, std::size_t count, Tape::Shape shape) {
    const auto& xv = t.value(x);
    if (offset + count > xv.size()) throw Error(ErrorCode::ShapeMismatch, "slice out of range");
    std::vector<double> v(xv.begin() + offset, xv.begin() + offset + count);
    return t.record(std::move(v), std::move(shape), {x},
                    [x, offset](Tape& tp, const std::vector<double>& g) { tp.accumulate_at(x, offset, g); });
}

Var concat(Tape& t, std::span<const Var> xs, Tape::Shape shape) {
    std::vector<double> v;
    std::vector<std::size_t> offs;
    for (Var x : xs) {
        offs.push_back(v.size());
        v.insert(v.end(), t.value(x).begin(), t.value(x).end());
    }
    std::vector<Var> in(xs.begin(), xs.end());
    return t.record(std::move(v), std::move(shape), in, [in, offs](Tape& tp, const std::vector<double>& g) {
        for (std::size_t k = 0; k < in.size(); ++k) {
            const std::size_t len = tp.value(in[k]).size();
            tp.accumulate(in[k], std::span<const double>(g.data() + offs[k], len));
        }
    });
}

Var relu(Tape& t, Var x) {
    std::vector<double> v = t.value(x);
    for (auto& e : v) e = std::max(e, 0.0);
    return t.record(std::move(v), t.shape(x), {x}, [x](Tape& tp, const std::vector<double>& g) {
        const auto& xv = tp.value(x);
        std::vector<double> gx(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] = xv[i] > 0.0 ? g[i] : 0.0;
        tp.accumulate(x, gx);
    });
}

Var scaled_sum(Tape& t, std::span<const Var> xs, double scale) {
    double s = 0.0;
    for (Var x : xs) {
        if (t.value(x).size() != 1) throw Error(ErrorCode::ShapeMismatch, "scaled_sum takes scalars");
        s += scale * t.value(x)[0];
    }
    std::vector<Var> in(xs.begin(), xs.end());
    return t.record({s}, {1}, in, [in, scale](Tape& tp, const std::vector<double>& g) {
        const double gs = g[0] * scale;
        for (Var x : in) tp.accumulate(x, std::span<const double>(&gs, 1));
    });
}

// ---- Log-Euclidean ops ----------------------------------------------------------

Var le_features(Tape& t, MetricKind metric, Var stack, const SolverOptions& opts) {
    const std::size_t n = stack_dim(t, stack), ch = t.shape(stack)[0], d = lower_count(n);
    auto evs = std::make_shared<std::vector<PhiEval>>();
    std::vector<double> out;
    out.reserve(ch * d);
    for (std::size_t k = 0; k < ch; ++k) {
        PhiEval ev = phi_eval(metric, CorrelationMatrix::trusted(t.channel(stack, k)), opts);
        auto f = le_features_of(metric, ev.value.payload);
        out.insert(out.end(), f.begin(), f.end());
        if (t.needs_grad(stack)) evs->push_back(std::move(ev));
    }
    return t.record(std::move(out), {ch, d}, {stack}, [=](Tape& tp, const std::vector<double>& g) {
        for (std::size_t k = 0; k < ch; ++k) {
            DenseMatrix gp(n, n);
            features_adjoint(metric, n, std::span<const double>(g.data() + k * d, d), gp);
            DenseMatrix gc = zero_diag(phi_vjp((*evs)[k], gp));
            tp.accumulate_at(stack, k * n * n, gc.data());
        }
    });
}

Var le_coords(Tape& t, MetricKind metric, Var stack, const SolverOptions& opts) {
    const std::size_t n = stack_dim(t, stack), ch = t.shape(stack)[0], d = lower_count(n);
    auto evs = std::make_shared<std::vector<PhiEval>>();
    std::vector<double> out;
    out.reserve(ch * d);
    for (std::size_t k = 0; k < ch; ++k) {
        PhiEval ev = phi_eval(metric, CorrelationMatrix::trusted(t.channel(stack, k)), opts);
        auto c = prototype_coords(metric, ev.value.payload);
        out.insert(out.end(), c.begin(), c.end());
        if (t.needs_grad(stack)) evs->push_back(std::move(ev));
    }
    return t.record(std::move(out), {ch, d}, {stack}, [=](Tape& tp, const std::vector<double>& g) {
        for (std::size_t k = 0; k < ch; ++k) {
            DenseMatrix gp = prototype_coords_adjoint(metric, n, std::span<const double>(g.data() + k * d, d));
            DenseMatrix gc = zero_diag(phi_vjp((*evs)[k], gp));
            tp.accumulate_at(stack, k * n * n, gc.data());
        }
    });
}

Var le_from_coords(Tape& t, MetricKind metric, std::size_t m, Var coords, const SolverOptions& opts) {
    const std::size_t d = lower_count(m);
    const auto& cv = t.value(coords);
    if (d == 0 || cv.size() % d != 0) throw Error(ErrorCode::ShapeMismatch, "coordinate count is not a multiple of the slots");
    const std::size_t k = cv.size() / d;
    auto evs = std::make_shared<std::vector<PhiInvEval>>();
    std::vector<double> out;
    out.reserve(k * m * m);
    for (std::size_t q = 0; q < k; ++q) {
        DenseMatrix p = prototype_from_coords(metric, m, std::span<const double>(cv.data() + q * d, d));
        PhiInvEval ev = phi_inv_eval(PrototypeVector{metric, std::move(p)}, opts);
        out.insert(out.end(), ev.value.matrix().storage().begin(), ev.value.matrix().storage().end());
        evs->push_back(std::move(ev));
    }
    return stack_result(t, std::move(out), k, m, {coords}, [=](Tape& tp, const std::vector<double>& g) {
        std::vector<double> gc;
        gc.reserve(k * d);
        for (std::size_t q = 0; q < k; ++q) {
            DenseMatrix gy = zero_diag(sym(square_from(std::span<const double>(g.data() + q * m * m, m * m), m)));
            DenseMatrix gp = phi_inv_vjp((*evs)[q], gy);
            auto gv = prototype_from_coords_adjoint(metric, m, gp);
            gc.insert(gc.end(), gv.begin(), gv.end());
        }
        tp.accumulate(coords, gc);
    });
}

Var le_slot_logits(Tape& t, MetricKind metric, std::size_t n, Var features, Var z, Var gamma) {
    const std::size_t d = lower_count(n);
    const auto& fv = t.value(features);
    if (fv.size() % d != 0) throw Error(ErrorCode::ShapeMismatch, "feature size is not a multiple of n(n-1)/2");
    const std::size_t ch = fv.size() / d;
    const std::size_t slots = t.shape(z).empty() ? 0 : t.shape(z)[0];
    require_cols(t, z, slots, ch * d, "hyperplane normals");
    require_cols(t, gamma, slots, ch, "hyperplane offsets");
    const auto& zv = t.value(z);
    const auto& gv = t.value(gamma);
    std::vector<double> v(slots, 0.0);
    for (std::size_t s = 0; s < slots; ++s)
        for (std::size_t c = 0; c < ch; ++c) {
            const double* zs = zv.data() + s * ch * d + c * d;
            const double gam = gv[s * ch + c];
            if (metric != MetricKind::LSM) {
                const auto [fz, zz] = dot_and_sq(fv.data() + c * d, zs, d);
                v[s] += fz - gam * std::sqrt(metric == MetricKind::OLM ? 2.0 * zz : zz);
            } else {
                v[s] += dotp(fv.data() + c * d, zs, d) - gam * le_normal_norm(metric, n, {zs, d});
            }
        }
    return t.record(std::move(v), {slots}, {features, z, gamma}, [=](Tape& tp, const std::vector<double>& g) {
        const auto& fv2 = tp.value(features);
        const auto& zv2 = tp.value(z);
        const auto& gv2 = tp.value(gamma);
        std::vector<double> gf(ch * d, 0.0), gz(slots * ch * d, 0.0), gg(slots * ch, 0.0);
        std::vector<double> ngrad(d);
        for (std::size_t s = 0; s < slots; ++s) {
            if (g[s] == 0.0) continue;
            for (std::size_t c = 0; c < ch; ++c) {
                const double* zs = zv2.data() + s * ch * d + c * d;
                const double nrm = le_normal_norm(metric, n, {zs, d}, ngrad.data());
                const double gam = gv2[s * ch + c];
                for (std::size_t e = 0; e < d; ++e) {
                    gf[c * d + e] += g[s] * zs[e];
                    gz[s * ch * d + c * d + e] = g[s] * (fv2[c * d + e] - gam * ngrad[e]);
                }
                gg[s * ch + c] = -g[s] * nrm;
            }
        }
        tp.accumulate(features, gf);
        tp.accumulate(z, gz);
        tp.accumulate(gamma, gg);
    });
}

// ---- poly-Poincare ops ------------------------------------------------------------

std::vector<std::size_t> ppb_dims(std::size_t n, std::size_t copies) {
    std::vector<std::size_t> d;
    for (std::size_t c = 0; c < copies; ++c)
        for (std::size_t i = 1; i < n; ++i) d.push_back(i);
    return d;
}

Var cor_to_parts(Tape& t, Var stack) {
    const std::size_t n = stack_dim(t, stack), ch = t.shape(stack)[0], d = lower_count(n);
    auto ls = std::make_shared<std::vector<DenseMatrix>>();
    std::vector<double> out;
    out.reserve(ch * d);
    for (std::size_t k = 0; k < ch; ++k) {
        DenseMatrix l = chol(t.channel(stack, k));
        for (std::size_t i = 1; i < n; ++i) {
            Vec h(l.row_ptr(i), l.row_ptr(i) + i + 1);
            double hn = 0.0;
            for (double x : h) hn += x * x;
            hn = std::sqrt(hn);
            for (auto& x : h) x /= hn;
            Vec p = hs_to_pb(h);
            out.insert(out.end(), p.begin(), p.end());
        }
        ls->push_back(std::move(l));
    }
    return t.record(std::move(out), {ch * d}, {stack}, [=](Tape& tp, const std::vector<double>& g) {
        std::size_t off = 0;
        for (std::size_t k = 0; k < ch; ++k) {
            const DenseMatrix& l = (*ls)[k];
            DenseMatrix gl(n, n);
            for (std::size_t i = 1; i < n; ++i) {
                Vec h(l.row_ptr(i), l.row_ptr(i) + i + 1);
                double hn = 0.0;
                for (double x : h) hn += x * x;
                hn = std::sqrt(hn);
                for (auto& x : h) x /= hn;
                Vec gh = hs_to_pb_vjp(h, std::span<const double>(g.data() + off, i));
                off += i;
                double radial = 0.0;
                for (std::size_t j = 0; j <= i; ++j) radial += gh[j] * h[j];
                for (std::size_t j = 0; j <= i; ++j) gl(i, j) = (gh[j] - radial * h[j]) / hn;
            }
            DenseMatrix gc = zero_diag(chol_backward(l, gl));
            tp.accumulate_at(stack, k * n * n, gc.data());
        }
    });
}

Var parts_to_cor(Tape& t, Var parts, std::size_t k, std::size_t m) {
    const std::size_t d = lower_count(m);
    const auto& pv = t.value(parts);
    if (pv.size() != k * d) throw Error(ErrorCode::DimensionMismatch, "poly-Poincare size does not match the output");
    auto ls = std::make_shared<std::vector<DenseMatrix>>();
    std::vector<double> out;
    out.reserve(k * m * m);
    std::size_t off = 0;
    for (std::size_t q = 0; q < k; ++q) {
        DenseMatrix l(m, m);
        l(0, 0) = 1.0;
        for (std::size_t i = 1; i < m; ++i) {
            Vec h = pb_to_hs(std::span<const double>(pv.data() + off, i));
            off += i;
            for (std::size_t j = 0; j <= i; ++j) l(i, j) = h[j];
        }
        DenseMatrix c = matmul_nt(l, l);
        for (std::size_t i = 0; i < m; ++i) {
            c(i, i) = 1.0;
            for (std::size_t j = 0; j < i; ++j) c(j, i) = c(i, j);
        }
        out.insert(out.end(), c.storage().begin(), c.storage().end());
        ls->push_back(std::move(l));
    }
    return stack_result(t, std::move(out), k, m, {parts}, [=](Tape& tp, const std::vector<double>& g) {
        const auto& pv2 = tp.value(parts);
        std::vector<double> gp;
        gp.reserve(k * d);
        std::size_t off2 = 0;
        for (std::size_t q = 0; q < k; ++q) {
            DenseMatrix gc = zero_diag(sym(square_from(std::span<const double>(g.data() + q * m * m, m * m), m)));
            DenseMatrix gl = 2.0 * (gc * (*ls)[q]);
            for (std::size_t i = 1; i < m; ++i) {
                Vec gi = pb_to_hs_vjp(std::span<const double>(pv2.data() + off2, i),
                                      std::span<const double>(gl.row_ptr(i), i + 1));
                gp.insert(gp.end(), gi.begin(), gi.end());
                off2 += i;
            }
        }
        tp.accumulate(parts, gp);
    });
}

Var beta_concat_op(Tape& t, Var parts, std::vector<std::size_t> dims) {
    const auto& pv = t.value(parts);
    const std::size_t n = dims_total(dims);
    if (pv.size() != n) throw Error(ErrorCode::DimensionMismatch, "part dimensions do not match the input");
    auto ps = split_parts(pv, dims);
    Vec out = beta_concat(ps);
    return t.record(std::move(out), {n}, {parts}, [=](Tape& tp, const std::vector<double>& g) {
        if (dims.size() == 1) {
            tp.accumulate(parts, g);
            return;
        }
        auto ps2 = split_parts(tp.value(parts), dims);
        Vec v;
        std::vector<double> scale;
        for (const auto& p : ps2) {
            const double s = beta_ratio(double(n), double(p.size()));
            scale.push_back(s);
            for (double x : pb_log0(p)) v.push_back(s * x);
        }
        Vec gv = pb_exp0_vjp(v, g);
        std::vector<double> gp;
        gp.reserve(n);
        std::size_t off = 0;
        for (std::size_t i = 0; i < ps2.size(); ++i) {
            Vec gl(gv.begin() + off, gv.begin() + off + dims[i]);
            for (auto& x : gl) x *= scale[i];
            Vec gi = pb_log0_vjp(ps2[i], gl);
            gp.insert(gp.end(), gi.begin(), gi.end());
            off += dims[i];
        }
        tp.accumulate(parts, gp);
    });
}

Var beta_split_op(Tape& t, Var x, std::vector<std::size_t> dims) {
    const auto& xv = t.value(x);
    const std::size_t n = dims_total(dims);
    auto ps = beta_split(xv, dims);
    std::vector<double> out;
    out.reserve(n);
    for (const auto& p : ps) out.insert(out.end(), p.begin(), p.end());
    return t.record(std::move(out), {n}, {x}, [=](Tape& tp, const std::vector<double>& g) {
        if (dims.size() == 1) {
            tp.accumulate(x, g);
            return;
        }
        const auto& xv2 = tp.value(x);
        Vec u = pb_log0(xv2);
        Vec gu(n);
        std::size_t off = 0;
        for (std::size_t d : dims) {
            const double s = beta_ratio(double(d), double(n));
            Vec w(u.begin() + off, u.begin() + off + d);
            for (auto& e : w) e *= s;
            Vec gw = pb_exp0_vjp(w, std::span<const double>(g.data() + off, d));
            for (std::size_t i = 0; i < d; ++i) gu[off + i] = s * gw[i];
            off += d;
        }
        tp.accumulate(x, pb_log0_vjp(xv2, gu));
    });
}

Var ball_relu(Tape& t, Var parts, std::vector<std::size_t> dims) {
    const auto& pv = t.value(parts);
    if (pv.size() != dims_total(dims)) throw Error(ErrorCode::DimensionMismatch, "part dimensions do not match the input");
    std::vector<double> out;
    out.reserve(pv.size());
    for (const auto& p : split_parts(pv, dims)) {
        Vec l = pb_log0(p);
        for (auto& e : l) e = std::max(e, 0.0);
        Vec q = pb_exp0(l);
        out.insert(out.end(), q.begin(), q.end());
    }
    return t.record(std::move(out), t.shape(parts), {parts}, [=](Tape& tp, const std::vector<double>& g) {
        std::vector<double> gp;
        std::size_t off = 0;
        for (const auto& p : split_parts(tp.value(parts), dims)) {
            Vec l = pb_log0(p);
            Vec r = l;
            for (auto& e : r) e = std::max(e, 0.0);
            Vec gr = pb_exp0_vjp(r, std::span<const double>(g.data() + off, p.size()));
            for (std::size_t i = 0; i < p.size(); ++i)
                if (!(l[i] > 0.0)) gr[i] = 0.0;
            Vec gi = pb_log0_vjp(p, gr);
            gp.insert(gp.end(), gi.begin(), gi.end());
            off += p.size();
        }
        tp.accumulate(parts, gp);
    });
}

Var pb_logits(Tape& t, Var x, Var z, Var gamma) {
    const std::size_t dim = t.value(x).size();
    const std::size_t slots = t.shape(z).empty() ? 0 : t.shape(z)[0];
    require_cols(t, z, slots, dim, "Poincare normals");
    require_cols(t, gamma, slots, 1, "Poincare offsets");
    const auto& xv = t.value(x);
    const auto& zv = t.value(z);
    std::vector<double> v(slots);
    const double xx = dotp(xv.data(), xv.data(), dim);
    for (std::size_t s = 0; s < slots; ++s)
        v[s] = pb_mlr_logit(xv, xx, std::span<const double>(zv.data() + s * dim, dim), t.value(gamma)[s]);
    return t.record(std::move(v), {slots}, {x, z, gamma}, [=](Tape& tp, const std::vector<double>& g) {
        const auto& xv2 = tp.value(x);
        const auto& zv2 = tp.value(z);
        std::vector<double> gx(dim, 0.0), gz(slots * dim, 0.0), gg(slots, 0.0);
        for (std::size_t s = 0; s < slots; ++s) {
            if (g[s] == 0.0) continue;
            MlrLogitGrad lg =
                pb_mlr_logit_grad(xv2, std::span<const double>(zv2.data() + s * dim, dim), tp.value(gamma)[s]);
            for (std::size_t i = 0; i < dim; ++i) {
                gx[i] += g[s] * lg.dx[i];
                gz[s * dim + i] = g[s] * lg.dz[i];
            }
            gg[s] = g[s] * lg.dgamma;
        }
        tp.accumulate(x, gx);
        tp.accumulate(z, gz);
        tp.accumulate(gamma, gg);
    });
}

Var pb_fc_out(Tape& t, Var logits) {
    Vec y = pb_fc_from_logits(t.value(logits));
    const std::size_t n = y.size();
    return t.record(std::move(y), {n}, {logits}, [logits](Tape& tp, const std::vector<double>& g) {
        tp.accumulate(logits, pb_fc_from_logits_vjp(tp.value(logits), g));
    });
}

Var softmax_xent(Tape& t, Var logits, std::size_t label) {
    XentResult r = softmax_xent(t.value(logits), label);
    return t.record({r.loss}, {1}, {logits}, [logits, grad = std::move(r.grad)](Tape& tp, const std::vector<double>& g) {
        std::vector<double> gl(grad);
        for (auto& e : gl) e *= g[0];
        tp.accumulate(logits, gl);
    });
}

// ---- layers ---------------------------------------------------------------------

Var mlr_forward(Tape& t, Var stack, const MlrParams& p, ParamVars pv, const SolverOptions& opts) {
    p.check();
    if (stack_dim(t, stack) != p.n || t.shape(stack)[0] != p.channels)
        throw Error(ErrorCode::ShapeMismatch, "MLR input does not match the layer");
    if (is_log_euclidean(p.metric))
        return le_slot_logits(t, p.metric, p.n, le_features(t, p.metric, stack, opts), pv.z, pv.gamma);
    Var x = beta_concat_op(t, cor_to_parts(t, stack), ppb_dims(p.n, p.channels));
    return pb_logits(t, x, pv.z, pv.gamma);
}

Var fc_forward(Tape& t, Var stack, const FcParams& p, ParamVars pv, const SolverOptions& opts) {
    p.check();
    if (stack_dim(t, stack) != p.n || t.shape(stack)[0] != p.channels)
        throw Error(ErrorCode::ShapeMismatch, "FC input does not match the layer");
    return fc_from_repr(t, channel_repr(t, p.metric, stack, opts), p, pv, opts);
}

Var conv_forward(Tape& t, Var stack, const ConvParams& p, ParamVars pv, const SolverOptions& opts) {
    const FcParams& fc = p.fc;
    fc.check();
    if (stack_dim(t, stack) != fc.n) throw Error(ErrorCode::ShapeMismatch, "conv input size does not match the layer");
    const std::size_t ch = t.shape(stack)[0];
    const std::size_t nf = p.fields(ch);
    const std::size_t d = lower_count(fc.n);
    Var repr = channel_repr(t, fc.metric, stack, opts);
    if (nf == 1) return fc_from_repr(t, repr, fc, pv, opts);
    std::vector<Var> outs;
    for (std::size_t f = 0; f < nf; ++f) {
        Tape::Shape shape = is_log_euclidean(fc.metric) ? Tape::Shape{fc.channels, d} : Tape::Shape{fc.channels * d};
        Var part = slice(t, repr, f * p.stride * d, fc.channels * d, shape);
        outs.push_back(fc_from_repr(t, part, fc, pv, opts));
    }
    return concat(t, outs, {nf * fc.kernels, fc.m, fc.m});
}

Var tangent_relu_forward(Tape& t, Var stack, MetricKind metric, const SolverOptions& opts) {
    const std::size_t n = stack_dim(t, stack), ch = t.shape(stack)[0];
    if (is_log_euclidean(metric)) return le_from_coords(t, metric, n, relu(t, le_coords(t, metric, stack, opts)), opts);
    Var parts = ball_relu(t, cor_to_parts(t, stack), ppb_dims(n, ch));
    return parts_to_cor(t, parts, ch, n);
}

// ---- plain evaluation ----------------------------------------------------------------------

std::vector<double> cor_mlr_logits(std::span<const CorrelationMatrix> cs, const MlrParams& p,
                                   const SolverOptions& opts) {
    Tape t;
    Var in = stack_leaf(t, cs);
    return t.value(mlr_forward(t, in, p, {t.leaf(p.z), t.leaf(p.gamma)}, opts));
}

std::vector<double> fc_slot_values(std::span<const CorrelationMatrix> cs, const FcParams& p,
                                   const SolverOptions& opts) {
    p.check();
    Tape t;
    Var in = stack_leaf(t, cs);
    Var z = t.leaf(p.z), g = t.leaf(p.gamma);
    if (is_log_euclidean(p.metric))
        return t.value(le_slot_logits(t, p.metric, p.n, le_features(t, p.metric, in, opts), z, g));
    Var x = beta_concat_op(t, cor_to_parts(t, in), ppb_dims(p.n, p.channels));
    return t.value(pb_logits(t, x, z, g));
}

std::vector<CorrelationMatrix> cor_fc(std::span<const CorrelationMatrix> cs, const FcParams& p,
                                      const SolverOptions& opts) {
    Tape t;
    Var in = stack_leaf(t, cs);
    return unstack(t, fc_forward(t, in, p, {t.leaf(p.z), t.leaf(p.gamma)}, opts));
}

std::vector<CorrelationMatrix> cor_conv(std::span<const CorrelationMatrix> cs, const ConvParams& p,
                                        const SolverOptions& opts) {
    Tape t;
    Var in = stack_leaf(t, cs);
    return unstack(t, conv_forward(t, in, p, {t.leaf(p.fc.z), t.leaf(p.fc.gamma)}, opts));
}

CorrelationMatrix tangent_relu(const CorrelationMatrix& c, MetricKind metric, const SolverOptions& opts) {
    Tape t;
    Var in = stack_leaf(t, std::span<const CorrelationMatrix>(&c, 1));
    return unstack(t, tangent_relu_forward(t, in, metric, opts))[0];
}

DenseMatrix power_activation(const DenseMatrix& sigma, double p) {
    return sym_fun(SymFunction::power(p), sigma);
}

CorrelationMatrix power_correlation(const CorrelationMatrix& c, double p) {
    if (p == 1.0) return c;
    return cor_of(power_activation(c.matrix(), p));
}

XentResult softmax_xent(std::span<const double> logits, std::size_t label) {
    if (label >= logits.size()) throw Error(ErrorCode::InvalidArgument, "label out of range");
    const double mx = *std::max_element(logits.begin(), logits.end());
    double z = 0.0;
    for (double v : logits) z += std::exp(v - mx);
    XentResult r;
    r.loss = mx + std::log(z) - logits[label];
    r.grad.resize(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) r.grad[i] = std::exp(logits[i] - mx) / z;
    r.grad[label] -= 1.0;
    return r;
}

}  // namespace cornet
