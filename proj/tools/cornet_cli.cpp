// Command-line front end over the C API.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cornet/cornet.h"

namespace {

struct Failure {
    int code;
};

void check(cornet_status s) {
    if (s == CORNET_OK) return;
    std::cerr << "error: " << cornet_last_error() << "\n";
    throw Failure{cornet_exit_code(s)};
}

void usage_error(const std::string& msg) {
    std::cerr << "error: " << msg << "\n";
    throw Failure{1};
}

template <class T, void (*Free)(T*)>
struct Handle {
    T* p = nullptr;
    Handle() = default;
    Handle(const Handle&) = delete;
    Handle& operator=(const Handle&) = delete;
    ~Handle() { Free(p); }
};

using Config = Handle<cornet_config, cornet_config_free>;
using DatasetH = Handle<cornet_dataset, cornet_dataset_free>;
using ModelH = Handle<cornet_model, cornet_model_free>;
using TensorH = Handle<cornet_tensor, cornet_tensor_free>;

void load_config(Config& cfg, const std::string& path, const std::vector<std::string>& overrides) {
    check(cornet_config_load(path.c_str(), &cfg.p));
    for (const auto& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos) usage_error("--set expects key=value, got '" + kv + "'");
        check(cornet_config_set(cfg.p, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()));
    }
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream in(s);
    std::string item;
    while (std::getline(in, item, sep))
        if (!item.empty()) out.push_back(item);
    return out;
}

// ---- subcommands ----

struct DatagenArgs {
    std::string out;
    cornet_datagen_params p{};
    uint64_t sample_seed = 0;
};

int run_datagen(const DatagenArgs& a, bool has_sample_seed) {
    cornet_datagen_params p = a.p;
    p.has_sample_seed = has_sample_seed ? 1 : 0;
    p.sample_seed = a.sample_seed;
    DatasetH d;
    check(cornet_datagen(&p, &d.p));
    check(cornet_dataset_write(d.p, a.out.c_str()));
    std::printf("wrote %zu samples [%zu x %zu x %zu] to %s\n", cornet_dataset_size(d.p), cornet_dataset_channels(d.p),
                cornet_dataset_dim(d.p), cornet_dataset_dim(d.p), a.out.c_str());
    return 0;
}

struct TrainArgs {
    std::string config, data, out;
    std::vector<std::string> overrides;
    bool quiet = false;
};

int run_train(const TrainArgs& a) {
    Config cfg;
    load_config(cfg, a.config, a.overrides);
    DatasetH d;
    check(cornet_dataset_read(a.data.c_str(), &d.p));
    ModelH m;
    check(cornet_model_init(cfg.p, &m.p));
    std::error_code ec;
    std::filesystem::create_directories(a.out, ec);
    if (ec) {
        std::cerr << "error: cannot create " << a.out << "\n";
        return 3;
    }
    const std::string csv = (std::filesystem::path(a.out) / "metrics.csv").string();
    auto cb = [](const cornet_epoch_metrics* e, void* quiet) {
        if (!*static_cast<bool*>(quiet))
            std::printf("epoch %zu  loss %.6f  acc %.4f  %.2fs\n", e->epoch, e->loss, e->acc, e->seconds);
        std::fflush(stdout);
        return 1;
    };
    bool quiet = a.quiet;
    check(cornet_train(m.p, d.p, csv.c_str(), cb, &quiet));
    check(cornet_model_save(m.p, a.out.c_str()));
    double loss = 0, acc = 0;
    check(cornet_evaluate(m.p, d.p, &loss, &acc, nullptr, 0));
    std::printf("checkpoint %s  train loss %.6f  train acc %.4f\n", a.out.c_str(), loss, acc);
    return 0;
}

int run_eval(const std::string& ckpt, const std::string& data) {
    ModelH m;
    check(cornet_model_load(ckpt.c_str(), &m.p));
    DatasetH d;
    check(cornet_dataset_read(data.c_str(), &d.p));
    const size_t k = cornet_model_classes(m.p);
    std::vector<size_t> conf(k * k);
    double loss = 0, acc = 0;
    check(cornet_evaluate(m.p, d.p, &loss, &acc, conf.data(), conf.size()));
    std::printf("samples %zu  loss %.6f  accuracy %.4f\n", cornet_dataset_size(d.p), loss, acc);
    std::printf("confusion (rows: true class, columns: predicted)\n");
    for (size_t i = 0; i < k; ++i) {
        std::printf("  %zu:", i);
        for (size_t j = 0; j < k; ++j) std::printf(" %6zu", conf[i * k + j]);
        std::printf("\n");
    }
    return 0;
}

int run_gradcheck(const std::string& config, const std::vector<std::string>& overrides, bool has_seed,
                  uint64_t seed) {
    Config cfg;
    load_config(cfg, config, overrides);
    if (!has_seed) seed = cornet_config_seed(cfg.p);
    cornet_block_error blocks[8];
    size_t count = 0;
    int passed = 0;
    check(cornet_gradcheck(cfg.p, seed, blocks, 8, &count, &passed));
    double worst = 0;
    for (size_t i = 0; i < count; ++i) {
        std::printf("%-12s %6zu params  max rel err %.3e\n", blocks[i].name, blocks[i].size, blocks[i].rel_error);
        worst = std::max(worst, blocks[i].rel_error);
    }
    std::printf("%s (max %.3e, tolerance 1e-4)\n", passed ? "PASS" : "FAIL", worst);
    return passed ? 0 : 2;
}

int run_bench(const std::string& dims_s, const std::string& metrics_s, size_t repeats, uint64_t seed,
              const std::string& csv) {
    std::vector<size_t> dims;
    for (const auto& d : split(dims_s, ',')) {
        try {
            dims.push_back(std::stoul(d));
        } catch (const std::exception&) {
            usage_error("bad dimension '" + d + "'");
        }
        if (dims.back() < 4) usage_error("bench dims must be >= 4");
    }
    std::vector<cornet_metric> metrics;
    if (metrics_s == "all") {
        metrics = {CORNET_ECM, CORNET_LECM, CORNET_OLM, CORNET_LSM, CORNET_PHCM};
    } else {
        for (const auto& m : split(metrics_s, ',')) {
            cornet_metric id;
            if (cornet_metric_parse(m.c_str(), &id) != CORNET_OK) usage_error("unknown metric '" + m + "'");
            metrics.push_back(id);
        }
    }
    if (dims.empty() || metrics.empty()) usage_error("need at least one dimension and one metric");
    std::vector<cornet_bench_row> rows(dims.size() * metrics.size());
    size_t count = 0;
    check(cornet_bench(metrics.data(), metrics.size(), dims.data(), dims.size(), repeats, seed, rows.data(),
                       rows.size(), &count));
    std::printf("%-6s %6s %14s %14s\n", "metric", "n", "mean (s)", "std (s)");
    for (size_t i = 0; i < count; ++i)
        std::printf("%-6s %6zu %14.6e %14.6e\n", cornet_metric_name(rows[i].metric), rows[i].n, rows[i].mean_seconds,
                    rows[i].stddev_seconds);
    if (!csv.empty()) {
        std::ofstream f(csv);
        if (!f) {
            std::cerr << "error: cannot write " << csv << "\n";
            return 3;
        }
        f << "metric,n,repeats,mean_seconds,stddev_seconds\n";
        f.precision(9);
        for (size_t i = 0; i < count; ++i)
            f << cornet_metric_name(rows[i].metric) << ',' << rows[i].n << ',' << rows[i].repeats << ','
              << rows[i].mean_seconds << ',' << rows[i].stddev_seconds << '\n';
    }
    return 0;
}

int run_hyperplane(const std::string& metric_s, const std::string& zfile, double gamma, size_t grid,
                   const std::string& out) {
    cornet_metric metric;
    if (cornet_metric_parse(metric_s.c_str(), &metric) != CORNET_OK) usage_error("unknown metric '" + metric_s + "'");
    std::vector<double> zv;
    std::vector<size_t> shape;
    if (zfile.find(',') != std::string::npos) {
        // inline values: 9 give a 3x3 matrix, anything else a vector
        for (const auto& t : split(zfile, ',')) {
            try {
                zv.push_back(std::stod(t));
            } catch (const std::exception&) {
                usage_error("bad --z value '" + t + "'");
            }
        }
        if (zv.size() == 9)
            shape = {3, 3};
        else
            shape = {zv.size()};
    } else {
        TensorH z;
        check(cornet_tensor_read(zfile.c_str(), &z.p));
        for (size_t i = 0; i < cornet_tensor_ndim(z.p); ++i) shape.push_back(cornet_tensor_dim(z.p, i));
        zv.assign(cornet_tensor_data(z.p), cornet_tensor_data(z.p) + cornet_tensor_numel(z.p));
    }
    size_t count = 0;
    check(cornet_hyperplane(metric, zv.data(), shape.data(), shape.size(), gamma, grid, nullptr, 0, &count));
    std::vector<cornet_hyperplane_row> rows(count);
    check(cornet_hyperplane(metric, zv.data(), shape.data(), shape.size(), gamma, grid, rows.data(), rows.size(),
                            &count));
    std::ofstream f(out);
    if (!f) {
        std::cerr << "error: cannot write " << out << "\n";
        return 3;
    }
    f << "r21,r31,r32,v\n";
    f.precision(17);
    for (const auto& r : rows) f << r.r21 << ',' << r.r31 << ',' << r.r32 << ',' << r.v << '\n';
    std::printf("wrote %zu grid points to %s\n", count, out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Correlation-matrix networks: data generation, training, evaluation and diagnostics"};
    app.require_subcommand(1);

    DatagenArgs dg;
    cornet_datagen_defaults(&dg.p);
    auto* datagen = app.add_subcommand("datagen", "Generate a synthetic multi-class correlation dataset");
    datagen->add_option("--out", dg.out, "Output directory")->required();
    datagen->add_option("--classes", dg.p.classes, "Number of classes")->capture_default_str();
    datagen->add_option("--per-class", dg.p.per_class, "Samples per class")->capture_default_str();
    datagen->add_option("--dim", dg.p.dim, "Matrix size n")->capture_default_str();
    datagen->add_option("--channels", dg.p.channels, "Channels per sample")->capture_default_str();
    datagen->add_option("--spread", dg.p.spread, "Tangent noise scale")->capture_default_str();
    datagen->add_option("--sep", dg.p.sep, "Minimum anchor distance")->capture_default_str();
    datagen->add_option("--seed", dg.p.seed, "Seed for the class anchors")->capture_default_str();
    auto* sample_seed =
        datagen->add_option("--sample-seed", dg.sample_seed, "Seed for the sample noise (defaults to --seed)");

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Train a conv -> MLR network");
    train->add_option("--config", tr.config, "Config file (key = value)")->required();
    train->add_option("--data", tr.data, "Dataset directory")->required();
    train->add_option("--out", tr.out, "Checkpoint directory")->required();
    train->add_option("--set", tr.overrides, "Override a config key (key=value), repeatable");
    train->add_flag("--quiet", tr.quiet, "Do not print per-epoch lines");

    std::string ckpt, eval_data;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
    eval->add_option("--ckpt", ckpt, "Checkpoint directory")->required();
    eval->add_option("--data", eval_data, "Dataset directory")->required();

    std::string gc_config;
    std::vector<std::string> gc_overrides;
    uint64_t gc_seed = 0;
    auto* gradcheck = app.add_subcommand("gradcheck", "Compare analytic and finite-difference gradients");
    gradcheck->add_option("--config", gc_config, "Config file")->required();
    auto* gc_seed_opt = gradcheck->add_option("--seed", gc_seed, "Seed (defaults to the config seed)");
    gradcheck->add_option("--set", gc_overrides, "Override a config key (key=value), repeatable");

    std::string dims = "30,50,100", metrics = "all", bench_csv;
    size_t repeats = 30;
    uint64_t bench_seed = 0;
    auto* bench = app.add_subcommand("bench", "Time one FC(n->20) + MLR(10) forward per metric");
    bench->add_option("--dims", dims, "Comma-separated matrix sizes")->capture_default_str();
    bench->add_option("--metrics", metrics, "Comma-separated metrics or 'all'")->capture_default_str();
    bench->add_option("--repeats", repeats, "Repeats per metric")->capture_default_str()->check(CLI::PositiveNumber);
    bench->add_option("--seed", bench_seed, "Seed for inputs and parameters")->capture_default_str();
    bench->add_option("--csv", bench_csv, "Also write the table as CSV");

    std::string hp_metric, hp_z, hp_out;
    double hp_gamma = 0.0;
    size_t hp_grid = 20;
    auto* hyper = app.add_subcommand("hyperplane", "Sample an MLR logit over the 3x3 elliptope");
    hyper->add_option("--metric", hp_metric, "Metric")->required();
    hyper->add_option("--z", hp_z, "Normal: CORT file or comma list; [3,3] hollow matrix, or [3] vector for PHCM")->required();
    hyper->add_option("--gamma", hp_gamma, "Offset")->capture_default_str();
    hyper->add_option("--grid", hp_grid, "Grid points per axis")->capture_default_str()->check(CLI::PositiveNumber);
    hyper->add_option("--out", hp_out, "Output CSV")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*datagen) return run_datagen(dg, sample_seed->count() > 0);
        if (*train) return run_train(tr);
        if (*eval) return run_eval(ckpt, eval_data);
        if (*gradcheck) return run_gradcheck(gc_config, gc_overrides, gc_seed_opt->count() > 0, gc_seed);
        if (*bench) return run_bench(dims, metrics, repeats, bench_seed, bench_csv);
        if (*hyper) return run_hyperplane(hp_metric, hp_z, hp_gamma, hp_grid, hp_out);
    } catch (const Failure& f) {
        return f.code;
    }
    return 1;
}
