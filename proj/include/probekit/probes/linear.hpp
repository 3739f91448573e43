#pragma once

#include "probekit/probes/base.hpp"

namespace probekit {

// Multinomial logistic regression, full-batch gradient descent from a zero
// start. No randomness, so refits are bit-identical by construction.
class LogisticRegression final : public Classifier {
public:
    explicit LogisticRegression(double reg_strength) : lambda_(reg_strength) {}

    void fit(const MatD& x, const std::vector<int>& y, int num_classes, Rng&) override {
        const size_t n = x.rows, d = x.cols;
        k_ = num_classes;
        w_ = MatD(k_, d + 1);  // last column is the bias
        MatD grad(k_, d + 1);
        std::vector<double> p(k_);
        const double lr = 0.5;
        for (int iter = 0; iter < 400; ++iter) {
            std::fill(grad.data.begin(), grad.data.end(), 0.0);
            for (size_t i = 0; i < n; ++i) {
                const double* xi = x.row(i);
                for (int c = 0; c < k_; ++c)
                    p[c] = dot(w_.row(c), xi, d) + w_.at(c, d);
                detail::softmax_inplace(p);
                for (int c = 0; c < k_; ++c) {
                    const double g = p[c] - (y[i] == c ? 1.0 : 0.0);
                    double* gr = grad.row(c);
                    for (size_t j = 0; j < d; ++j) gr[j] += g * xi[j];
                    gr[d] += g;
                }
            }
            const double inv_n = 1.0 / static_cast<double>(n);
            for (int c = 0; c < k_; ++c) {
                double* wr = w_.row(c);
                const double* gr = grad.row(c);
                for (size_t j = 0; j < d; ++j)
                    wr[j] -= lr * (gr[j] * inv_n + lambda_ * inv_n * wr[j]);
                wr[d] -= lr * gr[d] * inv_n;  // bias unregularized
            }
        }
    }

    std::vector<int> predict(const MatD& x) const override {
        std::vector<int> out(x.rows);
        std::vector<double> s(k_);
        for (size_t i = 0; i < x.rows; ++i) {
            for (int c = 0; c < k_; ++c)
                s[c] = dot(w_.row(c), x.row(i), x.cols) + w_.at(c, x.cols);
            out[i] = detail::argmax_lowest(s.data(), k_);
        }
        return out;
    }

    json params_json() const override {
        return {{"weights", detail::mat_to_json(w_)}, {"num_classes", k_}};
    }
    void load_params(const json& j) override {
        w_ = detail::mat_from_json(j.at("weights"));
        k_ = j.at("num_classes").get<int>();
    }
    size_t fitted_param_count() const override { return w_.data.size(); }

private:
    double lambda_;
    int k_ = 0;
    MatD w_;
};

// One-vs-rest linear SVM with squared hinge loss, full-batch gradient
// descent. Each class head is trained by the same deterministic procedure,
// so relabeling classes just permutes the heads.
class LinearSvm final : public Classifier {
public:
    explicit LinearSvm(double reg_strength) : lambda_(reg_strength) {}

    void fit(const MatD& x, const std::vector<int>& y, int num_classes, Rng&) override {
        const size_t n = x.rows, d = x.cols;
        k_ = num_classes;
        w_ = MatD(k_, d + 1);
        std::vector<double> grad(d + 1);
        const double lr = 0.2;
        const double inv_n = 1.0 / static_cast<double>(n);
        for (int c = 0; c < k_; ++c) {
            double* wr = w_.row(c);
            for (int iter = 0; iter < 400; ++iter) {
                std::fill(grad.begin(), grad.end(), 0.0);
                for (size_t i = 0; i < n; ++i) {
                    const double* xi = x.row(i);
                    const double t = (y[i] == c) ? 1.0 : -1.0;
                    const double margin = 1.0 - t * (dot(wr, xi, d) + wr[d]);
                    if (margin <= 0.0) continue;
                    const double g = -2.0 * margin * t;
                    for (size_t j = 0; j < d; ++j) grad[j] += g * xi[j];
                    grad[d] += g;
                }
                for (size_t j = 0; j < d; ++j)
                    wr[j] -= lr * (grad[j] * inv_n + lambda_ * inv_n * wr[j]);
                wr[d] -= lr * grad[d] * inv_n;
            }
        }
    }

    std::vector<int> predict(const MatD& x) const override {
        std::vector<int> out(x.rows);
        std::vector<double> s(k_);
        for (size_t i = 0; i < x.rows; ++i) {
            for (int c = 0; c < k_; ++c)
                s[c] = dot(w_.row(c), x.row(i), x.cols) + w_.at(c, x.cols);
            out[i] = detail::argmax_lowest(s.data(), k_);
        }
        return out;
    }

    json params_json() const override {
        return {{"weights", detail::mat_to_json(w_)}, {"num_classes", k_}};
    }
    void load_params(const json& j) override {
        w_ = detail::mat_from_json(j.at("weights"));
        k_ = j.at("num_classes").get<int>();
    }
    size_t fitted_param_count() const override { return w_.data.size(); }

private:
    double lambda_;
    int k_ = 0;
    MatD w_;
};

}  // namespace probekit
