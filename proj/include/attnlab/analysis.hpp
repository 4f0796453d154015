#pragma once

#include "attnlab/optimizer.hpp"

#include <optional>

namespace attnlab {

/// A scalar metric that may be undefined (e.g. cosine of a zero vector).
/// When !defined, value is quiet NaN.
struct MetricValue {
    double value;
    bool defined;
};

/// a.b / (|a||b|); undefined if either vector is zero.
MetricValue cosine_similarity(const VectorXd& a, const VectorXd& b);

/// Pearson correlation of the rank vectors, ties receiving average
/// (fractional) ranks. Undefined for constant input or length < 2.
MetricValue spearman_correlation(const VectorXd& a, const VectorXd& b);

/// Configuration of the gradient-alignment sweep over lambda.
struct AlignmentConfig {
    ModelSpec base;                      // dims template; seed varies per instance
    int instances = 20;
    std::vector<double> lambda_grid = {0.1, 1.0, 10.0, 100.0};
    int target_position = 1;
    /// Iterate at which gradients are measured. 0 = the shared initial
    /// iterate (zero perturbation, no trajectory run). When > 0, a shared
    /// trajectory of this many normalized steps is run per instance first.
    int at_step = 0;
    /// Loss driving the shared trajectory when at_step > 0.
    LossKind trajectory_loss = LossKind::Adv;
    double trajectory_lambda = 1.0;
    double step_size = 0.05;
    /// Spearman ranks absolute gradient magnitudes unless signed is chosen.
    bool spearman_signed = false;
};

struct AlignmentReport {
    std::vector<double> lambda_grid;
    std::vector<double> cosine_per_lambda;
    std::vector<double> spearman_per_lambda;
    std::vector<int> n_valid_per_lambda;
    bool monotone_cosine = false;
    bool monotone_spearman = false;
    int n_instances = 0;
    std::string aggregation = "mean-over-instances";
};

/// For each instance seed and each lambda, the exact gradients of both losses
/// are compared at the configured iterate and the metrics averaged over
/// instances (undefined metrics are excluded; n_valid counts the rest).
AlignmentReport lambda_alignment_sweep(const AlignmentConfig& cfg);

/// First/last values and the fraction of strictly decreasing steps of one
/// tracked series.
struct SeriesTrend {
    double first = 0.0;
    double last = 0.0;
    double frac_decreasing = 0.0;
};

struct TrendSummary {
    SeriesTrend loss_hallu;
    SeriesTrend loss_adv;
    SeriesTrend eta_sum;
    SeriesTrend beta_sum;     // over records with beta_valid only
    bool has_beta = false;
    bool co_descent = false;  // both losses end below their start
};

TrendSummary trend_test(const Trace& trace);

} // namespace attnlab
