#pragma once

#include <cmath>

#include "probekit/probes/base.hpp"

namespace probekit {

// Kernelized SVM, one-vs-rest, squared hinge on the dual coefficients via
// deterministic full-batch gradient descent. RBF and cubic polynomial
// kernels; gamma fixed at 1/d on standardized inputs.
class KernelSvm final : public Classifier {
public:
    KernelSvm(const std::string& kernel, double reg_strength)
        : kernel_(kernel), lambda_(reg_strength) {
        if (kernel_ != "rbf" && kernel_ != "poly")
            throw std::invalid_argument("kernel must be rbf or poly");
    }

    void fit(const MatD& x, const std::vector<int>& y, int num_classes, Rng&) override {
        x_ = x;
        k_ = num_classes;
        const size_t n = x.rows;
        gamma_ = 1.0 / static_cast<double>(x.cols);
        MatD kmat(n, n);
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i; j < n; ++j)
                kmat.at(i, j) = kmat.at(j, i) = kernel_value(x.row(i), x.row(j), x.cols);
        double max_row = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double s = 0.0;
            for (size_t j = 0; j < n; ++j) s += std::abs(kmat.at(i, j));
            max_row = std::max(max_row, s);
        }
        const double lr = 1.0 / max_row;

        alpha_ = MatD(k_, n);
        bias_.assign(k_, 0.0);
        std::vector<double> f(n), df(n), grad(n);
        for (int c = 0; c < k_; ++c) {
            double* ac = alpha_.row(c);
            for (int iter = 0; iter < 500; ++iter) {
                for (size_t i = 0; i < n; ++i)
                    f[i] = dot(kmat.row(i), ac, n) + bias_[c];
                double db = 0.0;
                for (size_t i = 0; i < n; ++i) {
                    const double t = (y[i] == c) ? 1.0 : -1.0;
                    const double margin = 1.0 - t * f[i];
                    df[i] = margin > 0.0 ? -2.0 * margin * t : 0.0;
                    db += df[i];
                }
                for (size_t i = 0; i < n; ++i)
                    grad[i] = dot(kmat.row(i), df.data(), n) / n + lambda_ * ac[i];
                for (size_t i = 0; i < n; ++i) ac[i] -= lr * grad[i];
                bias_[c] -= lr * db / n;
            }
        }
    }

    std::vector<int> predict(const MatD& x) const override {
        std::vector<int> out(x.rows);
        std::vector<double> s(k_);
        for (size_t q = 0; q < x.rows; ++q) {
            for (int c = 0; c < k_; ++c) {
                double v = bias_[c];
                const double* ac = alpha_.row(c);
                for (size_t i = 0; i < x_.rows; ++i) {
                    if (ac[i] == 0.0) continue;
                    v += ac[i] * kernel_value(x_.row(i), x.row(q), x.cols);
                }
                s[c] = v;
            }
            out[q] = detail::argmax_lowest(s.data(), k_);
        }
        return out;
    }

    json params_json() const override {
        return {{"x", detail::mat_to_json(x_)}, {"alpha", detail::mat_to_json(alpha_)},
                {"bias", bias_},                {"kernel", kernel_},
                {"gamma", gamma_},              {"num_classes", k_}};
    }
    void load_params(const json& j) override {
        x_ = detail::mat_from_json(j.at("x"));
        alpha_ = detail::mat_from_json(j.at("alpha"));
        bias_ = j.at("bias").get<std::vector<double>>();
        kernel_ = j.at("kernel").get<std::string>();
        gamma_ = j.at("gamma").get<double>();
        k_ = j.at("num_classes").get<int>();
    }
    size_t fitted_param_count() const override {
        return alpha_.data.size() + bias_.size() + x_.data.size();
    }

private:
    double kernel_value(const double* a, const double* b, size_t d) const {
        if (kernel_ == "rbf") {
            double s = 0.0;
            for (size_t j = 0; j < d; ++j) {
                const double diff = a[j] - b[j];
                s += diff * diff;
            }
            return std::exp(-gamma_ * s);
        }
        const double p = gamma_ * dot(a, b, d) + 1.0;
        return p * p * p;
    }

    std::string kernel_;
    double lambda_;
    double gamma_ = 1.0;
    int k_ = 0;
    MatD x_, alpha_;
    std::vector<double> bias_;
};

}  // namespace probekit
