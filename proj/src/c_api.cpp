#include "cornet/cornet.h"

#include <cstring>
#include <string>

#include "cornet/bench.hpp"
#include "cornet/datagen.hpp"

using namespace cornet;

struct cornet_config {
    RunConfig cfg;
};
struct cornet_dataset {
    Dataset data;
};
struct cornet_model {
    Model model;
};
struct cornet_tensor {
    TensorData t;
};

namespace {

thread_local std::string g_last_error;

static_assert(int(CORNET_E_IO) == int(ErrorCode::IoError) + 1, "status codes mirror ErrorCode");

cornet_status status_of(ErrorCode c) { return cornet_status(int(c) + 1); }

cornet_status fail(cornet_status s, const std::string& what) {
    g_last_error = what;
    return s;
}

template <class F>
cornet_status guarded(F&& f) {
    try {
        g_last_error.clear();
        return f();
    } catch (const Error& e) {
        return fail(status_of(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(CORNET_E_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(CORNET_E_INTERNAL, e.what());
    }
}

#define CORNET_REQUIRE(cond)                                                    \
    do {                                                                        \
        if (!(cond)) return fail(CORNET_E_INVALID_ARGUMENT, "null or invalid argument: " #cond); \
    } while (0)

MetricKind to_metric(cornet_metric m) {
    if (int(m) < 0 || int(m) > 4) throw Error(ErrorCode::InvalidArgument, "unknown metric id");
    return MetricKind(int(m));
}

}  // namespace

extern "C" {

const char* cornet_last_error(void) { return g_last_error.c_str(); }

const char* cornet_status_name(cornet_status s) {
    if (s == CORNET_OK) return "Ok";
    if (s == CORNET_E_BUFFER_TOO_SMALL) return "BufferTooSmall";
    if (s == CORNET_E_INTERNAL) return "Internal";
    if (int(s) >= 1 && int(s) <= int(ErrorCode::IoError) + 1) return error_code_name(ErrorCode(int(s) - 1));
    return "Unknown";
}

int cornet_exit_code(cornet_status s) {
    if (s == CORNET_OK) return 0;
    if (s == CORNET_E_BUFFER_TOO_SMALL || s == CORNET_E_INTERNAL) return 1;
    if (int(s) < 1 || int(s) > int(ErrorCode::IoError) + 1) return 1;
    switch (error_family(ErrorCode(int(s) - 1))) {
        case ErrorFamily::Usage: return 1;
        case ErrorFamily::Numerical: return 2;
        case ErrorFamily::Io: return 3;
    }
    return 1;
}

const char* cornet_metric_name(cornet_metric m) {
    static const char* names[] = {"ECM", "LECM", "OLM", "LSM", "PHCM"};
    return int(m) >= 0 && int(m) <= 4 ? names[int(m)] : "?";
}

cornet_status cornet_metric_parse(const char* name, cornet_metric* out) {
    CORNET_REQUIRE(name && out);
    auto m = parse_metric(name);
    if (!m) return fail(CORNET_E_INVALID_ARGUMENT, std::string("unknown metric: ") + name);
    *out = cornet_metric(int(*m));
    return CORNET_OK;
}

// ---- configuration ----

cornet_status cornet_config_default(cornet_config** out) {
    CORNET_REQUIRE(out);
    return guarded([&] {
        *out = new cornet_config{};
        return CORNET_OK;
    });
}

cornet_status cornet_config_parse(const char* text, cornet_config** out) {
    CORNET_REQUIRE(text && out);
    return guarded([&] {
        *out = new cornet_config{parse_config(std::string(text))};
        return CORNET_OK;
    });
}

cornet_status cornet_config_load(const char* path, cornet_config** out) {
    CORNET_REQUIRE(path && out);
    return guarded([&] {
        *out = new cornet_config{load_config(path)};
        return CORNET_OK;
    });
}

cornet_status cornet_config_set(cornet_config* cfg, const char* key, const char* value) {
    CORNET_REQUIRE(cfg && key && value);
    return guarded([&] {
        KeyValues kv = parse_key_values(cfg->cfg.to_text());
        const std::string k(key);
        if (k == "metric") {
            kv["conv_metric"] = value;
            kv["mlr_metric"] = value;
        } else {
            if (!kv.count(k)) throw Error(ErrorCode::ConfigError, "unknown config key: " + k);
            kv[k] = value;
        }
        cfg->cfg = parse_config(kv);
        return CORNET_OK;
    });
}

cornet_status cornet_config_text(const cornet_config* cfg, char* buf, size_t cap, size_t* needed) {
    CORNET_REQUIRE(cfg);
    return guarded([&] {
        const std::string s = cfg->cfg.to_text();
        if (needed) *needed = s.size() + 1;
        if (!buf) return CORNET_OK;
        if (cap < s.size() + 1) return fail(CORNET_E_BUFFER_TOO_SMALL, "config text buffer too small");
        std::memcpy(buf, s.c_str(), s.size() + 1);
        return CORNET_OK;
    });
}

uint64_t cornet_config_seed(const cornet_config* cfg) { return cfg ? cfg->cfg.seed : 0; }

void cornet_config_free(cornet_config* cfg) { delete cfg; }

// ---- datasets ----

void cornet_datagen_defaults(cornet_datagen_params* p) {
    if (!p) return;
    DatagenParams d;
    *p = {d.classes, d.per_class, d.dim, d.channels, d.spread, d.sep, d.seed, 0, 0};
}

cornet_status cornet_datagen(const cornet_datagen_params* p, cornet_dataset** out) {
    CORNET_REQUIRE(p && out);
    return guarded([&] {
        DatagenParams d;
        d.classes = p->classes;
        d.per_class = p->per_class;
        d.dim = p->dim;
        d.channels = p->channels;
        d.spread = p->spread;
        d.sep = p->sep;
        d.seed = p->seed;
        if (p->has_sample_seed) d.sample_seed = p->sample_seed;
        *out = new cornet_dataset{generate_dataset(d)};
        return CORNET_OK;
    });
}

cornet_status cornet_dataset_read(const char* dir, cornet_dataset** out) {
    CORNET_REQUIRE(dir && out);
    return guarded([&] {
        *out = new cornet_dataset{read_dataset(dir)};
        return CORNET_OK;
    });
}

cornet_status cornet_dataset_write(const cornet_dataset* d, const char* dir) {
    CORNET_REQUIRE(d && dir);
    return guarded([&] {
        write_dataset(dir, d->data);
        return CORNET_OK;
    });
}

size_t cornet_dataset_size(const cornet_dataset* d) { return d ? d->data.size() : 0; }
size_t cornet_dataset_channels(const cornet_dataset* d) { return d ? d->data.channels : 0; }
size_t cornet_dataset_dim(const cornet_dataset* d) { return d ? d->data.n : 0; }
void cornet_dataset_free(cornet_dataset* d) { delete d; }

// ---- models ----

cornet_status cornet_model_init(const cornet_config* cfg, cornet_model** out) {
    CORNET_REQUIRE(cfg && out);
    return guarded([&] {
        *out = new cornet_model{Model::init(cfg->cfg)};
        return CORNET_OK;
    });
}

cornet_status cornet_model_load(const char* dir, cornet_model** out) {
    CORNET_REQUIRE(dir && out);
    return guarded([&] {
        *out = new cornet_model{load_checkpoint(dir)};
        return CORNET_OK;
    });
}

cornet_status cornet_model_save(const cornet_model* m, const char* dir) {
    CORNET_REQUIRE(m && dir);
    return guarded([&] {
        save_checkpoint(dir, m->model);
        return CORNET_OK;
    });
}

size_t cornet_model_classes(const cornet_model* m) { return m ? m->model.cfg.classes : 0; }

cornet_status cornet_model_config(const cornet_model* m, cornet_config** out) {
    CORNET_REQUIRE(m && out);
    return guarded([&] {
        *out = new cornet_config{m->model.cfg};
        return CORNET_OK;
    });
}

void cornet_model_free(cornet_model* m) { delete m; }

cornet_status cornet_train(cornet_model* m, const cornet_dataset* d, const char* metrics_csv,
                           cornet_epoch_callback cb, void* user) {
    CORNET_REQUIRE(m && d);
    return guarded([&] {
        const Dataset& data = d->data;
        if (data.channels != m->model.cfg.channels || data.n != m->model.cfg.n_in)
            throw Error(ErrorCode::ConfigError, "dataset shape [" + std::to_string(data.channels) + ", " +
                                                    std::to_string(data.n) + "] does not match the config");
        train(m->model, data, [&](const EpochMetrics& e) {
            if (metrics_csv) append_metrics(metrics_csv, e);
            if (!cb) return true;
            cornet_epoch_metrics cm{e.epoch, e.loss, e.acc, e.seconds};
            return cb(&cm, user) != 0;
        });
        return CORNET_OK;
    });
}

cornet_status cornet_evaluate(const cornet_model* m, const cornet_dataset* d, double* loss, double* accuracy,
                              size_t* confusion, size_t confusion_cap) {
    CORNET_REQUIRE(m && d);
    return guarded([&] {
        const std::size_t k = m->model.cfg.classes;
        if (confusion && confusion_cap < k * k) return fail(CORNET_E_BUFFER_TOO_SMALL, "confusion buffer too small");
        const Dataset& data = d->data;
        if (data.channels != m->model.cfg.channels || data.n != m->model.cfg.n_in)
            throw Error(ErrorCode::ConfigError, "dataset shape does not match the model");
        EvalResult r = evaluate(m->model, data);
        if (loss) *loss = r.loss;
        if (accuracy) *accuracy = r.accuracy;
        if (confusion)
            for (std::size_t i = 0; i < k; ++i)
                for (std::size_t j = 0; j < k; ++j) confusion[i * k + j] = r.confusion[i][j];
        return CORNET_OK;
    });
}

cornet_status cornet_model_logits(const cornet_model* m, const double* sample, size_t channels, size_t n,
                                  double* logits, size_t cap) {
    CORNET_REQUIRE(m && sample && logits);
    return guarded([&] {
        if (cap < m->model.cfg.classes) return fail(CORNET_E_BUFFER_TOO_SMALL, "logit buffer too small");
        std::vector<CorrelationMatrix> x;
        for (std::size_t c = 0; c < channels; ++c) {
            DenseMatrix mat(n, n);
            std::memcpy(mat.data().data(), sample + c * n * n, sizeof(double) * n * n);
            x.push_back(CorrelationMatrix::validated(std::move(mat)));
        }
        auto v = model_logits(m->model, preprocess(m->model.cfg, x));
        std::copy(v.begin(), v.end(), logits);
        return CORNET_OK;
    });
}

// ---- diagnostics ----

cornet_status cornet_gradcheck(const cornet_config* cfg, uint64_t seed, cornet_block_error* out, size_t cap,
                               size_t* count, int* passed) {
    CORNET_REQUIRE(cfg);
    return guarded([&] {
        GradcheckResult r = gradcheck(cfg->cfg, seed);
        if (count) *count = r.blocks.size();
        if (passed) *passed = r.passed() ? 1 : 0;
        if (out) {
            for (std::size_t i = 0; i < r.blocks.size() && i < cap; ++i) {
                std::memset(out[i].name, 0, sizeof out[i].name);
                std::strncpy(out[i].name, r.blocks[i].name.c_str(), sizeof out[i].name - 1);
                out[i].size = r.blocks[i].size;
                out[i].rel_error = r.blocks[i].rel_error;
            }
            if (cap < r.blocks.size()) return fail(CORNET_E_BUFFER_TOO_SMALL, "block buffer too small");
        }
        return CORNET_OK;
    });
}

cornet_status cornet_bench(const cornet_metric* metrics, size_t n_metrics, const size_t* dims, size_t n_dims,
                           size_t repeats, uint64_t seed, cornet_bench_row* out, size_t cap, size_t* count) {
    CORNET_REQUIRE(metrics && dims && out);
    return guarded([&] {
        if (cap < n_metrics * n_dims) return fail(CORNET_E_BUFFER_TOO_SMALL, "bench buffer too small");
        std::vector<MetricKind> ms;
        for (std::size_t i = 0; i < n_metrics; ++i) ms.push_back(to_metric(metrics[i]));
        auto rows = bench_forward(ms, std::vector<std::size_t>(dims, dims + n_dims), repeats, seed);
        for (std::size_t i = 0; i < rows.size(); ++i)
            out[i] = {cornet_metric(int(rows[i].metric)), rows[i].n, rows[i].repeats, rows[i].mean_seconds,
                      rows[i].stddev_seconds};
        if (count) *count = rows.size();
        return CORNET_OK;
    });
}

cornet_status cornet_hyperplane(cornet_metric metric, const double* z, const size_t* z_shape, size_t z_ndim,
                                double gamma, size_t grid, cornet_hyperplane_row* out, size_t cap, size_t* count) {
    CORNET_REQUIRE(z && z_shape && count);
    return guarded([&] {
        std::vector<std::size_t> shape(z_shape, z_shape + z_ndim);
        std::size_t numel = 1;
        for (auto s : shape) numel *= s;
        auto rows = hyperplane_grid(to_metric(metric), std::vector<double>(z, z + numel), shape, gamma, grid);
        *count = rows.size();
        if (!out) return CORNET_OK;
        if (cap < rows.size()) return fail(CORNET_E_BUFFER_TOO_SMALL, "hyperplane buffer too small");
        for (std::size_t i = 0; i < rows.size(); ++i) out[i] = {rows[i].r21, rows[i].r31, rows[i].r32, rows[i].v};
        return CORNET_OK;
    });
}

// ---- tensors ----

cornet_status cornet_tensor_create(const uint32_t* shape, size_t ndim, const double* data, cornet_tensor** out) {
    CORNET_REQUIRE((shape || ndim == 0) && out);
    return guarded([&] {
        TensorData t;
        t.shape.assign(shape, shape + ndim);
        const std::size_t n = t.numel();
        if (n > 0 && !data) throw Error(ErrorCode::InvalidArgument, "tensor data is null");
        t.data.assign(data, data + n);
        *out = new cornet_tensor{std::move(t)};
        return CORNET_OK;
    });
}

cornet_status cornet_tensor_read(const char* path, cornet_tensor** out) {
    CORNET_REQUIRE(path && out);
    return guarded([&] {
        *out = new cornet_tensor{read_tensor(path)};
        return CORNET_OK;
    });
}

cornet_status cornet_tensor_write(const cornet_tensor* t, const char* path) {
    CORNET_REQUIRE(t && path);
    return guarded([&] {
        write_tensor(path, t->t);
        return CORNET_OK;
    });
}

size_t cornet_tensor_ndim(const cornet_tensor* t) { return t ? t->t.shape.size() : 0; }
uint32_t cornet_tensor_dim(const cornet_tensor* t, size_t axis) {
    return t && axis < t->t.shape.size() ? t->t.shape[axis] : 0;
}
size_t cornet_tensor_numel(const cornet_tensor* t) { return t ? t->t.data.size() : 0; }
const double* cornet_tensor_data(const cornet_tensor* t) { return t ? t->t.data.data() : nullptr; }
void cornet_tensor_free(cornet_tensor* t) { delete t; }

}  // extern "C"
