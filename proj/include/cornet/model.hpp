#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "cornet/io.hpp"
#include "cornet/layers.hpp"

namespace cornet {

enum class OptimizerKind { Sgd, Adam };
enum class Activation { None, TangentRelu };

struct RunConfig {
    MetricKind conv_metric = MetricKind::ECM;
    MetricKind mlr_metric = MetricKind::ECM;
    std::size_t n_in = 8;
    std::size_t channels = 2;
    std::size_t field_size = 2;
    std::size_t stride = 1;
    std::size_t kernels = 2;
    std::size_t m_hidden = 4;
    std::size_t classes = 3;
    double power = 1.0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double lr = 0.01;
    double weight_decay = 0.0;
    std::size_t epochs = 30;
    std::size_t batch_size = 30;
    std::uint64_t seed = 0;
    double dplus_tol = 1e-12;
    int dplus_max_iter = 100;
    DstarMode dstar_mode = DstarMode::Newton1;
    double dstar_tol = 1e-10;
    int dstar_max_iter = 50;
    Activation activation = Activation::None;

    SolverOptions solver() const;
    /// Throws ConfigError on invalid values.
    void validate() const;
    /// One `key = value` line per field.
    std::string to_text() const;
};

/// Unknown keys and malformed values are ConfigErrors.
RunConfig parse_config(const std::string& text);
RunConfig parse_config(const KeyValues& kv);
RunConfig load_config(const std::filesystem::path& path);

struct Dataset {
    std::size_t channels = 0, n = 0;
    std::vector<std::vector<CorrelationMatrix>> samples;
    std::vector<std::uint32_t> labels;

    std::size_t size() const { return samples.size(); }
    std::size_t num_classes() const;
};

/// samples.cort [N, ch, n, n] and labels.corl; every matrix is validated on read.
void write_dataset(const std::filesystem::path& dir, const Dataset& d);
Dataset read_dataset(const std::filesystem::path& dir);

/// conv -> [tangent ReLU] -> MLR.
struct Model {
    RunConfig cfg;
    ConvParams conv;
    MlrParams mlr;

    static Model init(const RunConfig& cfg);
    std::size_t conv_outputs() const { return conv.fields(cfg.channels) * cfg.kernels; }
    /// Parameter blocks in a fixed order: conv_z, conv_gamma, mlr_z, mlr_gamma.
    std::vector<DenseMatrix*> blocks();
    std::vector<const DenseMatrix*> blocks() const;
    static const std::vector<std::string>& block_names();
};

/// Applies the configured matrix power to every channel.
std::vector<CorrelationMatrix> preprocess(const RunConfig& cfg, std::span<const CorrelationMatrix> x);

std::vector<double> model_logits(const Model& m, std::span<const CorrelationMatrix> x);

struct BatchResult {
    double loss = 0.0;  // mean over the batch
    std::size_t correct = 0;
    std::vector<DenseMatrix> grads;  // same order as Model::blocks
};

/// Mean cross-entropy and its exact gradient over the given (preprocessed) samples.
BatchResult forward_backward(const Model& m, std::span<const std::vector<CorrelationMatrix>> xs,
                             std::span<const std::uint32_t> labels);

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

EvalResult evaluate(const Model& m, const Dataset& d);

class Optimizer {
public:
    explicit Optimizer(const RunConfig& cfg) : cfg_(cfg) {}
    void step(Model& m, const std::vector<DenseMatrix>& grads);

private:
    RunConfig cfg_;
    std::size_t t_ = 0;
    std::vector<DenseMatrix> m1_, m2_;
};

struct EpochMetrics {
    std::size_t epoch = 0;
    double loss = 0.0;
    double acc = 0.0;
    double seconds = 0.0;
};

/// Returning false from the callback stops training after that epoch.
using EpochCallback = std::function<bool(const EpochMetrics&)>;

/// Trains in place. After every epoch the whole dataset is re-evaluated and logged.
std::vector<EpochMetrics> train(Model& m, const Dataset& d, const EpochCallback& cb = {});

// ---- checkpoints ----------------------------------------------------------------

/// Directory with `manifest`, one CORT file per block, and metrics.csv when given.
void save_checkpoint(const std::filesystem::path& dir, const Model& m);
Model load_checkpoint(const std::filesystem::path& dir);
/// Appends one CSV row, writing the header first if the file is new.
void append_metrics(const std::filesystem::path& csv, const EpochMetrics& e);

// ---- gradient check -----------------------------------------------------------------

struct BlockCheck {
    std::string name;
    std::size_t size = 0;
    double rel_error = 0.0;  // |analytic - numeric|_2 / max(|analytic|_2, |numeric|_2)
};

struct GradcheckResult {
    std::vector<BlockCheck> blocks;
    double max_rel_error() const;
    bool passed(double tol = 1e-4) const { return max_rel_error() < tol; }
};

/// Central differences (step h) of forward_backward at the initial model with jittered offsets,
/// on a small synthetic batch. Solver tolerances are tightened to keep the difference quotients clean.
GradcheckResult gradcheck(const RunConfig& cfg, std::uint64_t seed, double h = 1e-6);

}  // namespace cornet
