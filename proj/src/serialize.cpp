#include "attnlab/serialize.hpp"

#include <cmath>
#include <cstdio>

namespace attnlab {

std::string fmt17(double v) {
    if (std::isnan(v)) return "nan";
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

const char* const kTraceCsvHeader =
    "step,loss_hallu,loss_adv,eta_sum,beta_sum,beta_valid,grad_cosine,"
    "grad_norm_hallu,grad_norm_adv";

void write_trace_csv(std::ostream& os, const Trace& trace) {
    os << kTraceCsvHeader << "\n";
    for (const TraceRecord& r : trace.records) {
        os << r.step << ',' << fmt17(r.loss_hallu) << ',' << fmt17(r.loss_adv) << ','
           << fmt17(r.eta_sum) << ',' << fmt17(r.beta_sum) << ','
           << (r.beta_valid ? 1 : 0) << ',' << fmt17(r.grad_cosine) << ','
           << fmt17(r.grad_norm_hallu) << ',' << fmt17(r.grad_norm_adv) << "\n";
    }
}

void write_convergence_csv(std::ostream& os, const ConvergenceReport& rep) {
    os << "scale,gap,taylor_resid_hallu,taylor_resid_adv\n";
    for (std::size_t i = 0; i < rep.scales.size(); ++i)
        os << fmt17(rep.scales[i]) << ',' << fmt17(rep.gaps[i]) << ','
           << fmt17(rep.taylor_resid_hallu[i]) << ',' << fmt17(rep.taylor_resid_adv[i])
           << "\n";
}

void write_alignment_csv(std::ostream& os, const AlignmentReport& rep) {
    os << "lambda,cosine,spearman,n_valid\n";
    for (std::size_t i = 0; i < rep.lambda_grid.size(); ++i)
        os << fmt17(rep.lambda_grid[i]) << ',' << fmt17(rep.cosine_per_lambda[i]) << ','
           << fmt17(rep.spearman_per_lambda[i]) << ',' << rep.n_valid_per_lambda[i]
           << "\n";
}

namespace {

json num(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

double num_from(const json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    return j.get<double>();
}

json matrix_to_json(const MatrixXd& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(num(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

MatrixXd matrix_from_json(const json& j) {
    const int rows = static_cast<int>(j.size());
    const int cols = rows ? static_cast<int>(j.at(0).size()) : 0;
    MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            m(r, c) = num_from(j.at(r).at(c));
    return m;
}

} // namespace

json to_json(const GradientField& g) {
    return json{{"d_delta_t", matrix_to_json(g.d_delta_t)},
                {"d_delta_v", matrix_to_json(g.d_delta_v)}};
}

GradientField gradient_field_from_json(const json& j) {
    GradientField g;
    g.d_delta_t = matrix_from_json(j.at("d_delta_t"));
    g.d_delta_v = matrix_from_json(j.at("d_delta_v"));
    return g;
}

json to_json(const GradientReport& r) {
    return json{{"exact_adv", to_json(r.exact_adv)},
                {"exact_hallu", to_json(r.exact_hallu)},
                {"fd_adv", to_json(r.fd_adv)},
                {"fd_hallu", to_json(r.fd_hallu)},
                {"decomp_adv", to_json(r.decomp_adv)},
                {"decomp_hallu", to_json(r.decomp_hallu)},
                {"rel_err_fd_adv", num(r.rel_err_fd_adv)},
                {"rel_err_fd_hallu", num(r.rel_err_fd_hallu)},
                {"cos_exact_vs_decomp_adv", num(r.cos_exact_vs_decomp_adv)},
                {"cos_exact_vs_decomp_hallu", num(r.cos_exact_vs_decomp_hallu)}};
}

GradientReport gradient_report_from_json(const json& j) {
    GradientReport r;
    r.exact_adv = gradient_field_from_json(j.at("exact_adv"));
    r.exact_hallu = gradient_field_from_json(j.at("exact_hallu"));
    r.fd_adv = gradient_field_from_json(j.at("fd_adv"));
    r.fd_hallu = gradient_field_from_json(j.at("fd_hallu"));
    r.decomp_adv = gradient_field_from_json(j.at("decomp_adv"));
    r.decomp_hallu = gradient_field_from_json(j.at("decomp_hallu"));
    r.rel_err_fd_adv = num_from(j.at("rel_err_fd_adv"));
    r.rel_err_fd_hallu = num_from(j.at("rel_err_fd_hallu"));
    r.cos_exact_vs_decomp_adv = num_from(j.at("cos_exact_vs_decomp_adv"));
    r.cos_exact_vs_decomp_hallu = num_from(j.at("cos_exact_vs_decomp_hallu"));
    return r;
}

json to_json(const ConvergenceReport& r) {
    return json{{"scales", r.scales},
                {"gaps", r.gaps},
                {"taylor_resid_hallu", r.taylor_resid_hallu},
                {"taylor_resid_adv", r.taylor_resid_adv},
                {"fitted_order", num(r.fitted_order)},
                {"taylor_order_hallu", num(r.taylor_order_hallu)},
                {"taylor_order_adv", num(r.taylor_order_adv)}};
}

ConvergenceReport convergence_report_from_json(const json& j) {
    ConvergenceReport r;
    r.scales = j.at("scales").get<std::vector<double>>();
    r.gaps = j.at("gaps").get<std::vector<double>>();
    r.taylor_resid_hallu = j.at("taylor_resid_hallu").get<std::vector<double>>();
    r.taylor_resid_adv = j.at("taylor_resid_adv").get<std::vector<double>>();
    r.fitted_order = num_from(j.at("fitted_order"));
    r.taylor_order_hallu = num_from(j.at("taylor_order_hallu"));
    r.taylor_order_adv = num_from(j.at("taylor_order_adv"));
    return r;
}

json to_json(const AlignmentReport& r) {
    json cos = json::array(), sp = json::array();
    for (double v : r.cosine_per_lambda) cos.push_back(num(v));
    for (double v : r.spearman_per_lambda) sp.push_back(num(v));
    return json{{"lambda_grid", r.lambda_grid},
                {"cosine_per_lambda", cos},
                {"spearman_per_lambda", sp},
                {"n_valid_per_lambda", r.n_valid_per_lambda},
                {"monotone_cosine", r.monotone_cosine},
                {"monotone_spearman", r.monotone_spearman},
                {"n_instances", r.n_instances},
                {"aggregation", r.aggregation}};
}

AlignmentReport alignment_report_from_json(const json& j) {
    AlignmentReport r;
    r.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    for (const json& v : j.at("cosine_per_lambda")) r.cosine_per_lambda.push_back(num_from(v));
    for (const json& v : j.at("spearman_per_lambda"))
        r.spearman_per_lambda.push_back(num_from(v));
    r.n_valid_per_lambda = j.at("n_valid_per_lambda").get<std::vector<int>>();
    r.monotone_cosine = j.at("monotone_cosine").get<bool>();
    r.monotone_spearman = j.at("monotone_spearman").get<bool>();
    r.n_instances = j.at("n_instances").get<int>();
    r.aggregation = j.at("aggregation").get<std::string>();
    return r;
}

json to_json(const TrendSummary& s) {
    auto series = [](const SeriesTrend& t) {
        return json{{"first", t.first}, {"last", t.last},
                    {"frac_decreasing", t.frac_decreasing}};
    };
    json j{{"loss_hallu", series(s.loss_hallu)},
           {"loss_adv", series(s.loss_adv)},
           {"eta_sum", series(s.eta_sum)},
           {"co_descent", s.co_descent},
           {"has_beta", s.has_beta}};
    if (s.has_beta) j["beta_sum"] = series(s.beta_sum);
    return j;
}

} // namespace attnlab
