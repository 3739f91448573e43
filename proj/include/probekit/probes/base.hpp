#pragma once

#include <memory>
#include <vector>

#include <json.hpp>

#include "probekit/common.hpp"
#include "probekit/mat.hpp"

namespace probekit {

using nlohmann::json;

// Classifiers work on class indices 0..k-1; the probe layer maps them back
// to the caller's label values. fit may use the rng, predict never does.
class Classifier {
public:
    virtual ~Classifier() = default;
    virtual void fit(const MatD& x, const std::vector<int>& y, int num_classes, Rng& rng) = 0;
    virtual std::vector<int> predict(const MatD& x) const = 0;
    virtual json params_json() const = 0;
    virtual void load_params(const json& j) = 0;
    virtual size_t fitted_param_count() const = 0;
};

namespace detail {

inline int argmax_lowest(const double* v, int n) {
    int best = 0;
    for (int i = 1; i < n; ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

inline void softmax_inplace(std::vector<double>& v) {
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double z = 0.0;
    for (double& x : v) {
        x = std::exp(x - mx);
        z += x;
    }
    for (double& x : v) x /= z;
}

inline json mat_to_json(const MatD& m) {
    return json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}};
}

inline MatD mat_from_json(const json& j) {
    MatD m(j.at("rows").get<size_t>(), j.at("cols").get<size_t>());
    m.data = j.at("data").get<std::vector<double>>();
    if (m.data.size() != m.rows * m.cols) throw ShapeMismatch("serialized matrix");
    return m;
}

}  // namespace detail

}  // namespace probekit
