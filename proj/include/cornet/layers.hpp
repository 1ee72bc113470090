#pragma once

#include <random>
#include <span>
#include <vector>

#include "cornet/geometry.hpp"
#include "cornet/hyperbolic.hpp"
#include "cornet/tape.hpp"

namespace cornet {

/// Strictly lower index pairs (i, j), i > j, in row-major order.
std::vector<std::pair<std::size_t, std::size_t>> lower_pairs(std::size_t n);

/// Norm of the hyperplane normal for the hollow matrix with strict-lower entries z,
/// measured in the flat codomain of a Log-Euclidean metric.
double le_normal_norm(MetricKind metric, std::size_t n, std::span<const double> z, double* grad = nullptr);
/// Features F(P) of a prototype matrix such that <P, normal(z)> = F . z.
std::vector<double> le_features_of(MetricKind metric, const DenseMatrix& payload);

// ---- parameter containers -----------------------------------------------------

/// Logits of `classes` hyperplanes over `channels` inputs of size n.
/// Log-Euclidean: z is [classes, channels * n(n-1)/2], gamma [classes, channels].
/// PHCM: z is [classes, channels * n(n-1)/2] over the concatenated ball, gamma [classes, 1].
struct MlrParams {
    MetricKind metric = MetricKind::ECM;
    std::size_t n = 0, channels = 1, classes = 0;
    DenseMatrix z, gamma;

    static MlrParams zeros(MetricKind metric, std::size_t n, std::size_t channels, std::size_t classes);
    static MlrParams init(MetricKind metric, std::size_t n, std::size_t channels, std::size_t classes,
                          std::mt19937_64& rng);
    void check() const;
};

/// FC from `channels` inputs of size n to `kernels` outputs of size m.
/// Rows are kernels * m(m-1)/2 coordinate slots, kernel-major.
struct FcParams {
    MetricKind metric = MetricKind::ECM;
    std::size_t n = 0, m = 0, channels = 1, kernels = 1;
    DenseMatrix z, gamma;

    std::size_t slots() const { return prototype_dim(m); }
    std::size_t parameter_count() const { return z.size() + gamma.size(); }

    static FcParams zeros(MetricKind metric, std::size_t n, std::size_t m, std::size_t channels, std::size_t kernels);
    static FcParams init(MetricKind metric, std::size_t n, std::size_t m, std::size_t channels, std::size_t kernels,
                         std::mt19937_64& rng);
    void check() const;
};

/// FC shared across receptive fields of `fc.channels` consecutive channels.
struct ConvParams {
    FcParams fc;
    std::size_t stride = 1;

    std::size_t field_size() const { return fc.channels; }
    /// Number of receptive fields; throws ShapeMismatch if the layout does not tile.
    std::size_t fields(std::size_t in_channels) const;
};

// ---- tape operations ------------------------------------------------------------

using Var = Tape::Var;

/// Leaf holding a [channels, n, n] stack.
Var stack_leaf(Tape& t, std::span<const CorrelationMatrix> cs);

Var slice(Tape& t, Var x, std::size_t offset, std::size_t count, Tape::Shape shape);
Var concat(Tape& t, std::span<const Var> xs, Tape::Shape shape);
Var relu(Tape& t, Var x);
/// sum_i scale * x_i over scalar nodes.
Var scaled_sum(Tape& t, std::span<const Var> xs, double scale);

/// [ch, n, n] -> [ch, n(n-1)/2] features of phi.
Var le_features(Tape& t, MetricKind metric, Var stack, const SolverOptions& opts);
/// [ch, n, n] -> [ch, n(n-1)/2] prototype coordinates.
Var le_coords(Tape& t, MetricKind metric, Var stack, const SolverOptions& opts);
/// [k * m(m-1)/2] coordinates -> [k, m, m] through phi^{-1}.
Var le_from_coords(Tape& t, MetricKind metric, std::size_t m, Var coords, const SolverOptions& opts);
/// Hyperplane logits sum_c (F_c . z_sc - gamma_sc |normal(z_sc)|).
Var le_slot_logits(Tape& t, MetricKind metric, std::size_t n, Var features, Var z, Var gamma);

/// [ch, n, n] -> concatenated Poincare parts of every channel, dims 1..n-1 each.
Var cor_to_parts(Tape& t, Var stack);
/// Concatenated parts of k correlation matrices of size m -> [k, m, m].
Var parts_to_cor(Tape& t, Var parts, std::size_t k, std::size_t m);
Var beta_concat_op(Tape& t, Var parts, std::vector<std::size_t> dims);
Var beta_split_op(Tape& t, Var x, std::vector<std::size_t> dims);
/// Exp0 . ReLU . Log0 on each part.
Var ball_relu(Tape& t, Var parts, std::vector<std::size_t> dims);
Var pb_logits(Tape& t, Var x, Var z, Var gamma);
Var pb_fc_out(Tape& t, Var logits);

/// Part dimensions 1..n-1 repeated `copies` times.
std::vector<std::size_t> ppb_dims(std::size_t n, std::size_t copies);

Var softmax_xent(Tape& t, Var logits, std::size_t label);

// ---- layers on the tape ---------------------------------------------------------------

struct ParamVars {
    Var z = 0, gamma = 0;
};

Var mlr_forward(Tape& t, Var stack, const MlrParams& p, ParamVars pv, const SolverOptions& opts);
Var fc_forward(Tape& t, Var stack, const FcParams& p, ParamVars pv, const SolverOptions& opts);
/// Output order: field-major, then kernel.
Var conv_forward(Tape& t, Var stack, const ConvParams& p, ParamVars pv, const SolverOptions& opts);
Var tangent_relu_forward(Tape& t, Var stack, MetricKind metric, const SolverOptions& opts);

// ---- plain evaluation ----------------------------------------------------------------------

std::vector<double> cor_mlr_logits(std::span<const CorrelationMatrix> cs, const MlrParams& p,
                                   const SolverOptions& opts = {});
/// Slot values v of the FC (the coordinates of phi(Y) for Log-Euclidean metrics).
std::vector<double> fc_slot_values(std::span<const CorrelationMatrix> cs, const FcParams& p,
                                   const SolverOptions& opts = {});
std::vector<CorrelationMatrix> cor_fc(std::span<const CorrelationMatrix> cs, const FcParams& p,
                                      const SolverOptions& opts = {});
std::vector<CorrelationMatrix> cor_conv(std::span<const CorrelationMatrix> cs, const ConvParams& p,
                                        const SolverOptions& opts = {});
CorrelationMatrix tangent_relu(const CorrelationMatrix& c, MetricKind metric, const SolverOptions& opts = {});

/// sigma^p for SPD sigma.
DenseMatrix power_activation(const DenseMatrix& sigma, double p);
/// Cor(C^p).
CorrelationMatrix power_correlation(const CorrelationMatrix& c, double p);

struct XentResult {
    double loss = 0.0;
    std::vector<double> grad;
};
XentResult softmax_xent(std::span<const double> logits, std::size_t label);

}  // namespace cornet
