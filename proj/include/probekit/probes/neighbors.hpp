#pragma once

#include <algorithm>
#include <limits>

#include "probekit/probes/base.hpp"

namespace probekit {

// Brute-force k-nearest-neighbours. Ties in distance go to the lower row
// index; vote ties go to the class with the smaller summed distance, then
// the smaller class index.
class Knn final : public Classifier {
public:
    explicit Knn(int n_neighbors) : k_neighbors_(n_neighbors) {}

    void fit(const MatD& x, const std::vector<int>& y, int num_classes, Rng&) override {
        x_ = x;
        y_ = y;
        k_ = num_classes;
    }

    std::vector<int> predict(const MatD& x) const override {
        const size_t n_train = x_.rows;
        const size_t k = std::min<size_t>(static_cast<size_t>(k_neighbors_), n_train);
        std::vector<int> out(x.rows);
        std::vector<std::pair<double, size_t>> dist(n_train);
        for (size_t i = 0; i < x.rows; ++i) {
            const double* q = x.row(i);
            for (size_t t = 0; t < n_train; ++t) {
                double s = 0.0;
                const double* r = x_.row(t);
                for (size_t j = 0; j < x.cols; ++j) {
                    const double diff = q[j] - r[j];
                    s += diff * diff;
                }
                dist[t] = {s, t};
            }
            std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k), dist.end());
            std::vector<int> votes(k_, 0);
            std::vector<double> sum_dist(k_, 0.0);
            for (size_t t = 0; t < k; ++t) {
                votes[y_[dist[t].second]] += 1;
                sum_dist[y_[dist[t].second]] += dist[t].first;
            }
            int best = -1;
            for (int c = 0; c < k_; ++c) {
                if (votes[c] == 0) continue;
                if (best < 0 || votes[c] > votes[best] ||
                    (votes[c] == votes[best] && sum_dist[c] < sum_dist[best]))
                    best = c;
            }
            out[i] = best;
        }
        return out;
    }

    json params_json() const override {
        return {{"x", detail::mat_to_json(x_)}, {"y", y_}, {"num_classes", k_}};
    }
    void load_params(const json& j) override {
        x_ = detail::mat_from_json(j.at("x"));
        y_ = j.at("y").get<std::vector<int>>();
        k_ = j.at("num_classes").get<int>();
    }
    size_t fitted_param_count() const override { return x_.data.size(); }

private:
    int k_neighbors_;
    int k_ = 0;
    MatD x_;
    std::vector<int> y_;
};

// Gaussian naive Bayes with shared smoothing added to every class variance.
class GaussianNb final : public Classifier {
public:
    explicit GaussianNb(double var_smoothing) : smoothing_(var_smoothing) {}

    void fit(const MatD& x, const std::vector<int>& y, int num_classes, Rng&) override {
        const size_t n = x.rows, d = x.cols;
        k_ = num_classes;
        mean_ = MatD(k_, d);
        var_ = MatD(k_, d);
        log_prior_.assign(k_, 0.0);
        std::vector<int> counts(k_, 0);
        for (size_t i = 0; i < n; ++i) {
            counts[y[i]] += 1;
            const double* xi = x.row(i);
            for (size_t j = 0; j < d; ++j) mean_.at(y[i], j) += xi[j];
        }
        for (int c = 0; c < k_; ++c)
            for (size_t j = 0; j < d; ++j) mean_.at(c, j) /= counts[c];
        for (size_t i = 0; i < n; ++i) {
            const double* xi = x.row(i);
            for (size_t j = 0; j < d; ++j) {
                const double diff = xi[j] - mean_.at(y[i], j);
                var_.at(y[i], j) += diff * diff;
            }
        }
        double max_var = 0.0;
        for (int c = 0; c < k_; ++c)
            for (size_t j = 0; j < d; ++j) {
                var_.at(c, j) /= counts[c];
                max_var = std::max(max_var, var_.at(c, j));
            }
        const double floor_var = smoothing_ * std::max(max_var, 1.0);
        for (double& v : var_.data) v += floor_var;
        for (int c = 0; c < k_; ++c)
            log_prior_[c] = std::log(static_cast<double>(counts[c]) / static_cast<double>(n));
    }

    std::vector<int> predict(const MatD& x) const override {
        std::vector<int> out(x.rows);
        std::vector<double> s(k_);
        for (size_t i = 0; i < x.rows; ++i) {
            const double* xi = x.row(i);
            for (int c = 0; c < k_; ++c) {
                double ll = log_prior_[c];
                for (size_t j = 0; j < x.cols; ++j) {
                    const double diff = xi[j] - mean_.at(c, j);
                    ll -= 0.5 * (std::log(2.0 * 3.14159265358979323846 * var_.at(c, j)) +
                                 diff * diff / var_.at(c, j));
                }
                s[c] = ll;
            }
            out[i] = detail::argmax_lowest(s.data(), k_);
        }
        return out;
    }

    json params_json() const override {
        return {{"mean", detail::mat_to_json(mean_)},
                {"var", detail::mat_to_json(var_)},
                {"log_prior", log_prior_},
                {"num_classes", k_}};
    }
    void load_params(const json& j) override {
        mean_ = detail::mat_from_json(j.at("mean"));
        var_ = detail::mat_from_json(j.at("var"));
        log_prior_ = j.at("log_prior").get<std::vector<double>>();
        k_ = j.at("num_classes").get<int>();
    }
    size_t fitted_param_count() const override {
        return mean_.data.size() + var_.data.size() + log_prior_.size();
    }

private:
    double smoothing_;
    int k_ = 0;
    MatD mean_, var_;
    std::vector<double> log_prior_;
};

}  // namespace probekit
