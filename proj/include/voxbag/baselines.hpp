#ifndef VOXBAG_BASELINES_HPP_
#define VOXBAG_BASELINES_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "voxbag/bagging.hpp"
#include "voxbag/error.hpp"
#include "voxbag/rng.hpp"
#include "voxbag/tensor.hpp"

namespace voxbag {

// All baselines share the ensemble contract: fit(X [n x d], y in {0,1}),
// predict_proba returning a 2-vector that sums to 1, argmax tie to class 0.

// ---- k-nearest neighbours ---------------------------------------------------

struct KnnModel {
    Tensor train;  // [n x d]
    std::vector<int> labels;
    std::size_t k = 5;
};

inline KnnModel knn_fit(const Tensor& X, const std::vector<int>& y, std::size_t k) {
    if (X.rank() != 2 || X.extent(0) == 0) throw Error(Errc::config, "knn_fit: empty training set");
    if (y.size() != X.extent(0)) throw Error(Errc::config, "knn_fit: label count mismatch");
    if (k < 1 || k > X.extent(0))
        throw Error(Errc::config, "knn_fit: k must satisfy 1 <= k <= n");
    return {X, y, k};
}

/// Vote fractions over the k nearest by Euclidean distance; distance ties
/// break toward the lower training index.
inline std::array<double, 2> knn_predict_proba(const KnnModel& model, std::span<const float> x) {
    const std::size_t n = model.train.extent(0), d = model.train.extent(1);
    if (x.size() != d) throw Error(Errc::config, "knn_predict_proba: feature width mismatch");
    std::vector<std::pair<double, std::size_t>> dist(n);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        const float* row = model.train.data() + i * d;
        for (std::size_t f = 0; f < d; ++f) {
            const double diff = static_cast<double>(row[f]) - static_cast<double>(x[f]);
            acc += diff * diff;
        }
        dist[i] = {acc, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(model.k), dist.end());
    std::array<double, 2> votes{0.0, 0.0};
    for (std::size_t i = 0; i < model.k; ++i) votes[model.labels[dist[i].second]] += 1.0;
    return {votes[0] / static_cast<double>(model.k), votes[1] / static_cast<double>(model.k)};
}

// ---- Gaussian naive Bayes ---------------------------------------------------

struct GaussianNbModel {
    std::array<std::vector<double>, 2> mean;
    std::array<std::vector<double>, 2> var;  // floored at epsilon
    std::array<double, 2> log_prior{0.0, 0.0};
    std::size_t n_features = 0;
};

inline GaussianNbModel gnb_fit(const Tensor& X, const std::vector<int>& y) {
    const std::size_t n = X.extent(0), d = X.extent(1);
    if (y.size() != n) throw Error(Errc::config, "gnb_fit: label count mismatch");
    std::array<std::size_t, 2> counts{0, 0};
    for (int l : y) ++counts[l];
    if (counts[0] == 0 || counts[1] == 0)
        throw Error(Errc::data, "gnb_fit: both classes must be present");

    GaussianNbModel m;
    m.n_features = d;
    for (int c = 0; c < 2; ++c) {
        m.mean[c].assign(d, 0.0);
        m.var[c].assign(d, 0.0);
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < d; ++f) m.mean[y[i]][f] += X[i * d + f];
    for (int c = 0; c < 2; ++c)
        for (std::size_t f = 0; f < d; ++f) m.mean[c][f] /= static_cast<double>(counts[c]);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < d; ++f) {
            const double diff = X[i * d + f] - m.mean[y[i]][f];
            m.var[y[i]][f] += diff * diff;
        }
    for (int c = 0; c < 2; ++c)
        for (std::size_t f = 0; f < d; ++f) m.var[c][f] /= static_cast<double>(counts[c]);

    // variance floor: 1e-9 of the largest overall feature variance
    double max_var = 0.0;
    std::vector<double> overall_mean(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < d; ++f) overall_mean[f] += X[i * d + f];
    for (std::size_t f = 0; f < d; ++f) overall_mean[f] /= static_cast<double>(n);
    for (std::size_t f = 0; f < d; ++f) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double diff = X[i * d + f] - overall_mean[f];
            acc += diff * diff;
        }
        max_var = std::max(max_var, acc / static_cast<double>(n));
    }
    const double eps = std::max(1e-9 * max_var, 1e-12);
    for (int c = 0; c < 2; ++c)
        for (std::size_t f = 0; f < d; ++f) m.var[c][f] = std::max(m.var[c][f], eps);

    for (int c = 0; c < 2; ++c)
        m.log_prior[c] = std::log(static_cast<double>(counts[c]) / static_cast<double>(n));
    return m;
}

inline std::array<double, 2> gnb_predict_proba(const GaussianNbModel& model, std::span<const float> x) {
    if (x.size() != model.n_features)
        throw Error(Errc::config, "gnb_predict_proba: feature width mismatch");
    std::array<double, 2> log_post;
    for (int c = 0; c < 2; ++c) {
        double acc = model.log_prior[c];
        for (std::size_t f = 0; f < model.n_features; ++f) {
            const double diff = static_cast<double>(x[f]) - model.mean[c][f];
            acc += -0.5 * std::log(2.0 * 3.14159265358979323846 * model.var[c][f]) -
                   diff * diff / (2.0 * model.var[c][f]);
        }
        log_post[c] = acc;
    }
    const double mx = std::max(log_post[0], log_post[1]);
    const double e0 = std::exp(log_post[0] - mx), e1 = std::exp(log_post[1] - mx);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

// ---- random forest ----------------------------------------------------------

/// Bagging plus per-split uniform subsampling of m_try features.
/// m_try = 0 defaults to floor(sqrt(d)); m_try = d reduces to plain bagging
/// bit-exactly (no rng draws are spent on feature selection).
struct RandomForestConfig {
    BaggingConfig bagging;
    std::size_t m_try = 0;
};

inline BaggingModel rf_fit(const Tensor& X, const std::vector<int>& y, RandomForestConfig config) {
    const std::size_t d = X.extent(1);
    std::size_t m_try = config.m_try;
    if (m_try == 0) m_try = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d))));
    if (m_try < 1 || m_try > d) throw Error(Errc::config, "rf_fit: m_try out of range");
    BaggingConfig cfg = config.bagging;
    cfg.tree.m_try = m_try == d ? 0 : m_try;  // 0 = all features, the plain-bagging path
    return fit_bagging(X, y, cfg);
}

// ---- random vector functional link -------------------------------------------

/// Frozen uniform[-1,1] hidden layer with ReLU, direct input links and a
/// bias column; output weights solve the ridge normal equations
/// (D^T D + lambda I) beta = D^T Y directly.
struct RvflModel {
    std::vector<double> hidden_w;  // [d x H]
    std::vector<double> hidden_b;  // [H]
    std::size_t n_features = 0;
    std::size_t hidden = 0;
    double lambda = 0.1;
    std::vector<double> beta;  // [(d + H + 1) x 2]
    double fit_residual_inf = 0.0;  // max |(D^T D + lambda I) beta - D^T Y| from the fit
    double rhs_inf_norm = 0.0;      // max |D^T Y|, the scale of the residual bound
};

namespace detail {

/// Cholesky solve of the SPD system A x = B (A [m x m], B [m x k], both
/// row-major); A is overwritten with its factor.
inline void cholesky_solve_inplace(std::vector<double>& A, std::vector<double>& B, std::size_t m,
                                   std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i; j < m; ++j) {
            double acc = A[i * m + j];
            for (std::size_t p = 0; p < i; ++p) acc -= A[i * m + p] * A[j * m + p];
            if (i == j) {
                if (acc <= 0.0) throw Error(Errc::numeric, "cholesky: matrix not positive definite");
                A[i * m + i] = std::sqrt(acc);
            } else {
                A[j * m + i] = acc / A[i * m + i];
            }
        }
    }
    // forward then back substitution on each right-hand side
    for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < m; ++i) {
            double acc = B[i * k + c];
            for (std::size_t p = 0; p < i; ++p) acc -= A[i * m + p] * B[p * k + c];
            B[i * k + c] = acc / A[i * m + i];
        }
        for (std::size_t i = m; i-- > 0;) {
            double acc = B[i * k + c];
            for (std::size_t p = i + 1; p < m; ++p) acc -= A[p * m + i] * B[p * k + c];
            B[i * k + c] = acc / A[i * m + i];
        }
    }
}

inline void rvfl_design_row(const RvflModel& m, std::span<const float> x, std::vector<double>& row) {
    const std::size_t d = m.n_features, H = m.hidden;
    row.resize(d + H + 1);
    for (std::size_t f = 0; f < d; ++f) row[f] = x[f];
    for (std::size_t h = 0; h < H; ++h) {
        double acc = m.hidden_b[h];
        for (std::size_t f = 0; f < d; ++f) acc += static_cast<double>(x[f]) * m.hidden_w[f * H + h];
        row[d + h] = acc > 0.0 ? acc : 0.0;
    }
    row[d + H] = 1.0;
}

}  // namespace detail

inline RvflModel rvfl_fit(const Tensor& X, const std::vector<int>& y, std::size_t hidden,
                          double lambda, std::uint64_t seed) {
    if (lambda <= 0.0) throw Error(Errc::config, "rvfl_fit: lambda must be > 0");
    const std::size_t n = X.extent(0), d = X.extent(1);
    if (y.size() != n) throw Error(Errc::config, "rvfl_fit: label count mismatch");

    RvflModel m;
    m.n_features = d;
    m.hidden = hidden;
    m.lambda = lambda;
    Rng rng(seed);
    Rng wrng = rng.derive(0), brng = rng.derive(1);
    m.hidden_w.resize(d * hidden);
    m.hidden_b.resize(hidden);
    for (auto& w : m.hidden_w) w = wrng.uniform(-1.0, 1.0);
    for (auto& b : m.hidden_b) b = brng.uniform(-1.0, 1.0);

    const std::size_t p = d + hidden + 1;
    std::vector<double> design(n * p);
    std::vector<double> row;
    for (std::size_t i = 0; i < n; ++i) {
        detail::rvfl_design_row(m, std::span<const float>(X.data() + i * d, d), row);
        std::copy(row.begin(), row.end(), design.begin() + static_cast<std::ptrdiff_t>(i * p));
    }

    // normal equations
    std::vector<double> gram(p * p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ri = design.data() + i * p;
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = a; b < p; ++b) gram[a * p + b] += ri[a] * ri[b];
    }
    for (std::size_t a = 0; a < p; ++a) {
        for (std::size_t b = 0; b < a; ++b) gram[a * p + b] = gram[b * p + a];
        gram[a * p + a] += lambda;
    }
    std::vector<double> rhs(p * 2, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double* ri = design.data() + i * p;
        const int c = y[i];
        for (std::size_t a = 0; a < p; ++a) rhs[a * 2 + c] += ri[a];
    }

    const std::vector<double> gram_copy = gram;
    const std::vector<double> rhs_copy = rhs;
    detail::cholesky_solve_inplace(gram, rhs, p, 2);
    m.beta = std::move(rhs);

    // residual of the normal equations, for the fit contract
    double resid = 0.0;
    for (std::size_t a = 0; a < p; ++a) {
        for (int c = 0; c < 2; ++c) {
            double acc = -rhs_copy[a * 2 + c];
            for (std::size_t b = 0; b < p; ++b) acc += gram_copy[a * p + b] * m.beta[b * 2 + c];
            resid = std::max(resid, std::abs(acc));
        }
    }
    m.fit_residual_inf = resid;
    for (double v : rhs_copy) m.rhs_inf_norm = std::max(m.rhs_inf_norm, std::abs(v));
    return m;
}

/// The fit contract: residual of the normal equations within 1e-6 of the
/// right-hand-side scale.
inline bool rvfl_residual_ok(const RvflModel& m) {
    return m.fit_residual_inf <= 1e-6 * std::max(1.0, m.rhs_inf_norm);
}

inline std::array<double, 2> rvfl_predict_proba(const RvflModel& model, std::span<const float> x) {
    if (x.size() != model.n_features)
        throw Error(Errc::config, "rvfl_predict_proba: feature width mismatch");
    std::vector<double> row;
    detail::rvfl_design_row(model, x, row);
    std::array<double, 2> score{0.0, 0.0};
    for (std::size_t a = 0; a < row.size(); ++a) {
        score[0] += row[a] * model.beta[a * 2 + 0];
        score[1] += row[a] * model.beta[a * 2 + 1];
    }
    const double mx = std::max(score[0], score[1]);
    const double e0 = std::exp(score[0] - mx), e1 = std::exp(score[1] - mx);
    return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

// ---- linear SVM (Pegasos) -----------------------------------------------------

struct LinearSvmModel {
    std::vector<double> w;
    double b = 0.0;
    double lambda = 1e-2;
};

struct SvmTracePoint {
    std::size_t epoch;
    double objective;  // lambda/2 ||w||^2 + mean hinge of the averaged iterate
};

inline double svm_objective(const std::vector<double>& w, double b, double lambda, const Tensor& X,
                            const std::vector<int>& y) {
    const std::size_t n = X.extent(0), d = X.extent(1);
    double hinge = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double margin = b;
        for (std::size_t f = 0; f < d; ++f) margin += w[f] * X[i * d + f];
        const double yy = y[i] == 1 ? 1.0 : -1.0;
        hinge += std::max(0.0, 1.0 - yy * margin);
    }
    double norm = 0.0;
    for (double v : w) norm += v * v;
    return 0.5 * lambda * norm + hinge / static_cast<double>(n);
}

/// Pegasos-style primal subgradient descent on lambda/2 ||w||^2 + mean hinge,
/// step 1/(lambda t), unregularized bias; the returned model is the average
/// of the per-step iterates. The trace records the averaged-iterate
/// objective after each epoch.
inline LinearSvmModel svm_fit(const Tensor& X, const std::vector<int>& y, double lambda,
                              std::size_t epochs, std::uint64_t seed,
                              std::vector<SvmTracePoint>* trace = nullptr) {
    const std::size_t n = X.extent(0), d = X.extent(1);
    if (y.size() != n) throw Error(Errc::config, "svm_fit: label count mismatch");
    bool has0 = false, has1 = false;
    for (int l : y) (l == 0 ? has0 : has1) = true;
    if (!has0 || !has1) throw Error(Errc::data, "svm_fit: both classes must be present");
    if (lambda <= 0.0) throw Error(Errc::config, "svm_fit: lambda must be > 0");

    std::vector<double> w(d, 0.0), w_avg(d, 0.0);
    double b = 0.0, b_avg = 0.0;
    std::size_t steps = 0;
    Rng rng(seed);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = n; i-- > 1;) {
            const std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
            std::swap(order[i], order[j]);
        }
        for (std::size_t pos = 0; pos < n; ++pos) {
            const std::size_t i = order[pos];
            ++steps;
            const double eta = 1.0 / (lambda * static_cast<double>(steps));
            double margin = b;
            for (std::size_t f = 0; f < d; ++f) margin += w[f] * X[i * d + f];
            const double yy = y[i] == 1 ? 1.0 : -1.0;
            const double shrink = 1.0 - eta * lambda;
            if (yy * margin < 1.0) {
                for (std::size_t f = 0; f < d; ++f) w[f] = shrink * w[f] + eta * yy * X[i * d + f];
                b += eta * yy;
            } else {
                for (std::size_t f = 0; f < d; ++f) w[f] = shrink * w[f];
            }
            for (std::size_t f = 0; f < d; ++f) {
                if (!std::isfinite(w[f]))
                    throw Error(Errc::numeric, "svm_fit: diverged (non-finite weight) at step " +
                                                   std::to_string(steps));
            }
            const double k = static_cast<double>(steps);
            for (std::size_t f = 0; f < d; ++f) w_avg[f] += (w[f] - w_avg[f]) / k;
            b_avg += (b - b_avg) / k;
        }
        if (trace) trace->push_back({epoch, svm_objective(w_avg, b_avg, lambda, X, y)});
    }
    return {std::move(w_avg), b_avg, lambda};
}

/// Margin through a fixed logistic squash; uncalibrated, for ROC ranking only.
inline std::array<double, 2> svm_predict_proba(const LinearSvmModel& model, std::span<const float> x) {
    if (x.size() != model.w.size())
        throw Error(Errc::config, "svm_predict_proba: feature width mismatch");
    double margin = model.b;
    for (std::size_t f = 0; f < model.w.size(); ++f) margin += model.w[f] * x[f];
    const double p1 = 1.0 / (1.0 + std::exp(-margin));
    return {1.0 - p1, p1};
}

}  // namespace voxbag

#endif  // VOXBAG_BASELINES_HPP_
