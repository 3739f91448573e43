#pragma once

#include <array>
#include <cmath>

#include "probekit/probes/base.hpp"

namespace probekit {

namespace detail {

struct Adam {
    std::vector<double> m, v;
    int t = 0;
    double lr;
    explicit Adam(size_t n, double learning_rate) : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}

    void step(std::vector<double>& w, const std::vector<double>& g) {
        t += 1;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        const double c1 = 1.0 - std::pow(b1, t);
        const double c2 = 1.0 - std::pow(b2, t);
        for (size_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            w[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
    }
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline void init_gaussian(std::vector<double>& w, size_t fan_in, Rng& rng) {
    const double scale = std::sqrt(2.0 / static_cast<double>(std::max<size_t>(fan_in, 1)));
    for (double& x : w) x = rng.gaussian() * scale;
}

}  // namespace detail

// One-hidden-layer ReLU network trained with full-batch Adam.
class Mlp final : public Classifier {
public:
    explicit Mlp(int hidden_width) : hidden_(hidden_width) {}

    void fit(const MatD& x, const std::vector<int>& y, int num_classes, Rng& rng) override {
        const size_t n = x.rows;
        d_ = x.cols;
        k_ = num_classes;
        w1_.assign(static_cast<size_t>(hidden_) * d_, 0.0);
        b1_.assign(hidden_, 0.0);
        w2_.assign(static_cast<size_t>(k_) * hidden_, 0.0);
        b2_.assign(k_, 0.0);
        detail::init_gaussian(w1_, d_, rng);
        detail::init_gaussian(w2_, hidden_, rng);

        detail::Adam opt1(w1_.size(), 0.01), ob1(b1_.size(), 0.01);
        detail::Adam opt2(w2_.size(), 0.01), ob2(b2_.size(), 0.01);
        std::vector<double> gw1(w1_.size()), gb1(b1_.size()), gw2(w2_.size()), gb2(b2_.size());
        std::vector<double> h(hidden_), z(k_), dh(hidden_);
        for (int epoch = 0; epoch < 200; ++epoch) {
            std::fill(gw1.begin(), gw1.end(), 0.0);
            std::fill(gb1.begin(), gb1.end(), 0.0);
            std::fill(gw2.begin(), gw2.end(), 0.0);
            std::fill(gb2.begin(), gb2.end(), 0.0);
            for (size_t i = 0; i < n; ++i) {
                const double* xi = x.row(i);
                for (int j = 0; j < hidden_; ++j) {
                    double s = b1_[j];
                    const double* w = w1_.data() + static_cast<size_t>(j) * d_;
                    for (size_t c = 0; c < d_; ++c) s += w[c] * xi[c];
                    h[j] = s > 0.0 ? s : 0.0;
                }
                for (int c = 0; c < k_; ++c) {
                    double s = b2_[c];
                    const double* w = w2_.data() + static_cast<size_t>(c) * hidden_;
                    for (int j = 0; j < hidden_; ++j) s += w[j] * h[j];
                    z[c] = s;
                }
                detail::softmax_inplace(z);
                z[y[i]] -= 1.0;
                std::fill(dh.begin(), dh.end(), 0.0);
                for (int c = 0; c < k_; ++c) {
                    double* gw = gw2.data() + static_cast<size_t>(c) * hidden_;
                    const double* w = w2_.data() + static_cast<size_t>(c) * hidden_;
                    for (int j = 0; j < hidden_; ++j) {
                        gw[j] += z[c] * h[j];
                        dh[j] += z[c] * w[j];
                    }
                    gb2[c] += z[c];
                }
                for (int j = 0; j < hidden_; ++j) {
                    if (h[j] <= 0.0) continue;
                    double* gw = gw1.data() + static_cast<size_t>(j) * d_;
                    for (size_t c = 0; c < d_; ++c) gw[c] += dh[j] * xi[c];
                    gb1[j] += dh[j];
                }
            }
            const double inv_n = 1.0 / static_cast<double>(n);
            for (double& g : gw1) g *= inv_n;
            for (double& g : gb1) g *= inv_n;
            for (double& g : gw2) g *= inv_n;
            for (double& g : gb2) g *= inv_n;
            opt1.step(w1_, gw1);
            ob1.step(b1_, gb1);
            opt2.step(w2_, gw2);
            ob2.step(b2_, gb2);
        }
    }

    std::vector<int> predict(const MatD& x) const override {
        std::vector<int> out(x.rows);
        std::vector<double> h(hidden_), z(k_);
        for (size_t i = 0; i < x.rows; ++i) {
            const double* xi = x.row(i);
            for (int j = 0; j < hidden_; ++j) {
                double s = b1_[j];
                const double* w = w1_.data() + static_cast<size_t>(j) * d_;
                for (size_t c = 0; c < d_; ++c) s += w[c] * xi[c];
                h[j] = s > 0.0 ? s : 0.0;
            }
            for (int c = 0; c < k_; ++c) {
                double s = b2_[c];
                const double* w = w2_.data() + static_cast<size_t>(c) * hidden_;
                for (int j = 0; j < hidden_; ++j) s += w[j] * h[j];
                z[c] = s;
            }
            out[i] = detail::argmax_lowest(z.data(), k_);
        }
        return out;
    }

    json params_json() const override {
        return {{"w1", w1_}, {"b1", b1_}, {"w2", w2_}, {"b2", b2_},
                {"hidden", hidden_}, {"input_dim", d_}, {"num_classes", k_}};
    }
    void load_params(const json& j) override {
        w1_ = j.at("w1").get<std::vector<double>>();
        b1_ = j.at("b1").get<std::vector<double>>();
        w2_ = j.at("w2").get<std::vector<double>>();
        b2_ = j.at("b2").get<std::vector<double>>();
        hidden_ = j.at("hidden").get<int>();
        d_ = j.at("input_dim").get<size_t>();
        k_ = j.at("num_classes").get<int>();
    }
    size_t fitted_param_count() const override {
        return w1_.size() + b1_.size() + w2_.size() + b2_.size();
    }

private:
    int hidden_;
    size_t d_ = 0;
    int k_ = 0;
    std::vector<double> w1_, b1_, w2_, b2_;
};

// Bidirectional LSTM over the pooled vector read as a length-d sequence of
// scalars. The two final hidden states feed a linear head.
class BiLstm final : public Classifier {
public:
    explicit BiLstm(int hidden_width) : h_(hidden_width) {}

    void fit(const MatD& x, const std::vector<int>& y, int num_classes, Rng& rng) override {
        seq_len_ = x.cols;
        k_ = num_classes;
        const size_t gates = 4 * static_cast<size_t>(h_);
        for (int dir = 0; dir < 2; ++dir) {
            wx_[dir].assign(gates, 0.0);
            wh_[dir].assign(gates * h_, 0.0);
            b_[dir].assign(gates, 0.0);
            detail::init_gaussian(wx_[dir], 1, rng);
            detail::init_gaussian(wh_[dir], h_, rng);
        }
        wo_.assign(static_cast<size_t>(k_) * 2 * h_, 0.0);
        bo_.assign(k_, 0.0);
        detail::init_gaussian(wo_, 2 * static_cast<size_t>(h_), rng);

        std::vector<detail::Adam> opts;
        opts.reserve(8);
        for (int dir = 0; dir < 2; ++dir) {
            opts.emplace_back(wx_[dir].size(), 0.02);
            opts.emplace_back(wh_[dir].size(), 0.02);
            opts.emplace_back(b_[dir].size(), 0.02);
        }
        opts.emplace_back(wo_.size(), 0.02);
        opts.emplace_back(bo_.size(), 0.02);

        const size_t n = x.rows;
        for (int epoch = 0; epoch < 40; ++epoch) {
            std::vector<std::vector<double>> grads;
            for (int dir = 0; dir < 2; ++dir) {
                grads.emplace_back(wx_[dir].size(), 0.0);
                grads.emplace_back(wh_[dir].size(), 0.0);
                grads.emplace_back(b_[dir].size(), 0.0);
            }
            grads.emplace_back(wo_.size(), 0.0);
            grads.emplace_back(bo_.size(), 0.0);
            for (size_t i = 0; i < n; ++i) backprop_one(x.row(i), y[i], grads);
            const double inv_n = 1.0 / static_cast<double>(n);
            for (auto& g : grads)
                for (double& v : g) v *= inv_n;
            int gi = 0;
            for (int dir = 0; dir < 2; ++dir) {
                opts[gi].step(wx_[dir], grads[gi]); ++gi;
                opts[gi].step(wh_[dir], grads[gi]); ++gi;
                opts[gi].step(b_[dir], grads[gi]); ++gi;
            }
            opts[gi].step(wo_, grads[gi]); ++gi;
            opts[gi].step(bo_, grads[gi]);
        }
    }

    std::vector<int> predict(const MatD& x) const override {
        std::vector<int> out(x.rows);
        std::vector<double> z(k_);
        for (size_t i = 0; i < x.rows; ++i) {
            const auto feats = encode(x.row(i));
            for (int c = 0; c < k_; ++c) {
                double s = bo_[c];
                const double* w = wo_.data() + static_cast<size_t>(c) * 2 * h_;
                for (int j = 0; j < 2 * h_; ++j) s += w[j] * feats[j];
                z[c] = s;
            }
            out[i] = detail::argmax_lowest(z.data(), k_);
        }
        return out;
    }

    json params_json() const override {
        return {{"wx_f", wx_[0]}, {"wh_f", wh_[0]}, {"b_f", b_[0]},
                {"wx_b", wx_[1]}, {"wh_b", wh_[1]}, {"b_b", b_[1]},
                {"wo", wo_},      {"bo", bo_},      {"hidden", h_},
                {"seq_len", seq_len_}, {"num_classes", k_}};
    }
    void load_params(const json& j) override {
        wx_[0] = j.at("wx_f").get<std::vector<double>>();
        wh_[0] = j.at("wh_f").get<std::vector<double>>();
        b_[0] = j.at("b_f").get<std::vector<double>>();
        wx_[1] = j.at("wx_b").get<std::vector<double>>();
        wh_[1] = j.at("wh_b").get<std::vector<double>>();
        b_[1] = j.at("b_b").get<std::vector<double>>();
        wo_ = j.at("wo").get<std::vector<double>>();
        bo_ = j.at("bo").get<std::vector<double>>();
        h_ = j.at("hidden").get<int>();
        seq_len_ = j.at("seq_len").get<size_t>();
        k_ = j.at("num_classes").get<int>();
    }
    size_t fitted_param_count() const override {
        return wx_[0].size() + wh_[0].size() + b_[0].size() + wx_[1].size() + wh_[1].size() +
               b_[1].size() + wo_.size() + bo_.size();
    }

private:
    struct Cache {
        std::vector<double> i, f, g, o, c, h, tanh_c;
    };

    // Gate layout inside the 4H vectors: [i | f | g | o].
    void cell(int dir, double xt, const std::vector<double>& h_prev,
              const std::vector<double>& c_prev, Cache& cc) const {
        const int H = h_;
        cc.i.resize(H); cc.f.resize(H); cc.g.resize(H); cc.o.resize(H);
        cc.c.resize(H); cc.h.resize(H); cc.tanh_c.resize(H);
        for (int j = 0; j < H; ++j) {
            double pre_i = wx_[dir][j] * xt + b_[dir][j];
            double pre_f = wx_[dir][H + j] * xt + b_[dir][H + j];
            double pre_g = wx_[dir][2 * H + j] * xt + b_[dir][2 * H + j];
            double pre_o = wx_[dir][3 * H + j] * xt + b_[dir][3 * H + j];
            const double* whi = wh_[dir].data() + static_cast<size_t>(j) * H;
            const double* whf = wh_[dir].data() + static_cast<size_t>(H + j) * H;
            const double* whg = wh_[dir].data() + static_cast<size_t>(2 * H + j) * H;
            const double* who = wh_[dir].data() + static_cast<size_t>(3 * H + j) * H;
            for (int p = 0; p < H; ++p) {
                pre_i += whi[p] * h_prev[p];
                pre_f += whf[p] * h_prev[p];
                pre_g += whg[p] * h_prev[p];
                pre_o += who[p] * h_prev[p];
            }
            cc.i[j] = detail::sigmoid(pre_i);
            cc.f[j] = detail::sigmoid(pre_f);
            cc.g[j] = std::tanh(pre_g);
            cc.o[j] = detail::sigmoid(pre_o);
            cc.c[j] = cc.f[j] * c_prev[j] + cc.i[j] * cc.g[j];
            cc.tanh_c[j] = std::tanh(cc.c[j]);
            cc.h[j] = cc.o[j] * cc.tanh_c[j];
        }
    }

    // Final hidden state of each direction, concatenated.
    std::vector<double> encode(const double* x) const {
        std::vector<double> feats(2 * h_, 0.0);
        for (int dir = 0; dir < 2; ++dir) {
            std::vector<double> h_prev(h_, 0.0), c_prev(h_, 0.0);
            Cache cc;
            for (size_t s = 0; s < seq_len_; ++s) {
                const size_t t = dir == 0 ? s : seq_len_ - 1 - s;
                cell(dir, x[t], h_prev, c_prev, cc);
                h_prev = cc.h;
                c_prev = cc.c;
            }
            std::copy(h_prev.begin(), h_prev.end(), feats.begin() + dir * h_);
        }
        return feats;
    }

    void backprop_one(const double* x, int label, std::vector<std::vector<double>>& grads) {
        const int H = h_;
        std::array<std::vector<Cache>, 2> caches;
        std::vector<double> feats(2 * H, 0.0);
        for (int dir = 0; dir < 2; ++dir) {
            std::vector<double> h_prev(H, 0.0), c_prev(H, 0.0);
            caches[dir].resize(seq_len_);
            for (size_t s = 0; s < seq_len_; ++s) {
                const size_t t = dir == 0 ? s : seq_len_ - 1 - s;
                cell(dir, x[t], h_prev, c_prev, caches[dir][s]);
                h_prev = caches[dir][s].h;
                c_prev = caches[dir][s].c;
            }
            std::copy(h_prev.begin(), h_prev.end(), feats.begin() + dir * H);
        }
        std::vector<double> z(k_);
        for (int c = 0; c < k_; ++c) {
            double s = bo_[c];
            const double* w = wo_.data() + static_cast<size_t>(c) * 2 * H;
            for (int j = 0; j < 2 * H; ++j) s += w[j] * feats[j];
            z[c] = s;
        }
        detail::softmax_inplace(z);
        z[label] -= 1.0;

        auto& g_wo = grads[6];
        auto& g_bo = grads[7];
        std::vector<double> dfeats(2 * H, 0.0);
        for (int c = 0; c < k_; ++c) {
            double* gw = g_wo.data() + static_cast<size_t>(c) * 2 * H;
            const double* w = wo_.data() + static_cast<size_t>(c) * 2 * H;
            for (int j = 0; j < 2 * H; ++j) {
                gw[j] += z[c] * feats[j];
                dfeats[j] += z[c] * w[j];
            }
            g_bo[c] += z[c];
        }

        for (int dir = 0; dir < 2; ++dir) {
            auto& g_wx = grads[dir * 3 + 0];
            auto& g_wh = grads[dir * 3 + 1];
            auto& g_b = grads[dir * 3 + 2];
            std::vector<double> dh(dfeats.begin() + dir * H, dfeats.begin() + (dir + 1) * H);
            std::vector<double> dc(H, 0.0), dh_next(H, 0.0);
            for (size_t s = seq_len_; s-- > 0;) {
                const Cache& cc = caches[dir][s];
                const size_t t = dir == 0 ? s : seq_len_ - 1 - s;
                const double xt = x[t];
                const std::vector<double>* h_prev = nullptr;
                const std::vector<double>* c_prev = nullptr;
                std::vector<double> zeros(H, 0.0);
                if (s > 0) {
                    h_prev = &caches[dir][s - 1].h;
                    c_prev = &caches[dir][s - 1].c;
                } else {
                    h_prev = &zeros;
                    c_prev = &zeros;
                }
                std::fill(dh_next.begin(), dh_next.end(), 0.0);
                for (int j = 0; j < H; ++j) {
                    const double dhj = dh[j];
                    double dcj = dc[j] + dhj * cc.o[j] * (1.0 - cc.tanh_c[j] * cc.tanh_c[j]);
                    const double do_ = dhj * cc.tanh_c[j] * cc.o[j] * (1.0 - cc.o[j]);
                    const double di = dcj * cc.g[j] * cc.i[j] * (1.0 - cc.i[j]);
                    const double df = dcj * (*c_prev)[j] * cc.f[j] * (1.0 - cc.f[j]);
                    const double dg = dcj * cc.i[j] * (1.0 - cc.g[j] * cc.g[j]);
                    dc[j] = dcj * cc.f[j];

                    const double dpre[4] = {di, df, dg, do_};
                    for (int gate = 0; gate < 4; ++gate) {
                        const size_t row = static_cast<size_t>(gate * H + j);
                        g_wx[row] += dpre[gate] * xt;
                        g_b[row] += dpre[gate];
                        double* gwh = g_wh.data() + row * H;
                        const double* wh = wh_[dir].data() + row * H;
                        for (int p = 0; p < H; ++p) {
                            gwh[p] += dpre[gate] * (*h_prev)[p];
                            dh_next[p] += dpre[gate] * wh[p];
                        }
                    }
                }
                dh = dh_next;
            }
        }
    }

    int h_;
    size_t seq_len_ = 0;
    int k_ = 0;
    std::array<std::vector<double>, 2> wx_, wh_, b_;
    std::vector<double> wo_, bo_;
};

// One 1-d convolution layer (kernel 5, ReLU), global max pool, linear head.
// The pooled vector is the input sequence, one channel.
class Cnn final : public Classifier {
public:
    explicit Cnn(int channels) : ch_(channels) {}

    static constexpr int kKernel = 5;

    void fit(const MatD& x, const std::vector<int>& y, int num_classes, Rng& rng) override {
        seq_len_ = x.cols;
        k_ = num_classes;
        wc_.assign(static_cast<size_t>(ch_) * kKernel, 0.0);
        bc_.assign(ch_, 0.0);
        wo_.assign(static_cast<size_t>(k_) * ch_, 0.0);
        bo_.assign(k_, 0.0);
        detail::init_gaussian(wc_, kKernel, rng);
        detail::init_gaussian(wo_, ch_, rng);

        detail::Adam o_wc(wc_.size(), 0.02), o_bc(bc_.size(), 0.02);
        detail::Adam o_wo(wo_.size(), 0.02), o_bo(bo_.size(), 0.02);
        const size_t n = x.rows;
        const size_t out_len = conv_out_len();
        std::vector<double> g_wc(wc_.size()), g_bc(bc_.size()), g_wo(wo_.size()),
            g_bo(bo_.size());
        MatD conv(ch_, out_len);
        std::vector<double> pooled(ch_), z(k_);
        std::vector<size_t> arg(ch_);
        for (int epoch = 0; epoch < 80; ++epoch) {
            std::fill(g_wc.begin(), g_wc.end(), 0.0);
            std::fill(g_bc.begin(), g_bc.end(), 0.0);
            std::fill(g_wo.begin(), g_wo.end(), 0.0);
            std::fill(g_bo.begin(), g_bo.end(), 0.0);
            for (size_t i = 0; i < n; ++i) {
                forward_one(x.row(i), conv, pooled, arg);
                for (int c = 0; c < k_; ++c) {
                    double s = bo_[c];
                    const double* w = wo_.data() + static_cast<size_t>(c) * ch_;
                    for (int j = 0; j < ch_; ++j) s += w[j] * pooled[j];
                    z[c] = s;
                }
                detail::softmax_inplace(z);
                z[y[i]] -= 1.0;
                std::vector<double> dpool(ch_, 0.0);
                for (int c = 0; c < k_; ++c) {
                    double* gw = g_wo.data() + static_cast<size_t>(c) * ch_;
                    const double* w = wo_.data() + static_cast<size_t>(c) * ch_;
                    for (int j = 0; j < ch_; ++j) {
                        gw[j] += z[c] * pooled[j];
                        dpool[j] += z[c] * w[j];
                    }
                    g_bo[c] += z[c];
                }
                for (int j = 0; j < ch_; ++j) {
                    if (conv.at(j, arg[j]) <= 0.0) continue;  // ReLU gate at the max
                    const size_t pos = arg[j];
                    double* gw = g_wc.data() + static_cast<size_t>(j) * kKernel;
                    for (int t = 0; t < kKernel; ++t) {
                        const double xv = pos + t < seq_len_ ? x.at(i, pos + t) : 0.0;
                        gw[t] += dpool[j] * xv;
                    }
                    g_bc[j] += dpool[j];
                }
            }
            const double inv_n = 1.0 / static_cast<double>(n);
            for (double& g : g_wc) g *= inv_n;
            for (double& g : g_bc) g *= inv_n;
            for (double& g : g_wo) g *= inv_n;
            for (double& g : g_bo) g *= inv_n;
            o_wc.step(wc_, g_wc);
            o_bc.step(bc_, g_bc);
            o_wo.step(wo_, g_wo);
            o_bo.step(bo_, g_bo);
        }
    }

    std::vector<int> predict(const MatD& x) const override {
        std::vector<int> out(x.rows);
        MatD conv(ch_, conv_out_len());
        std::vector<double> pooled(ch_), z(k_);
        std::vector<size_t> arg(ch_);
        for (size_t i = 0; i < x.rows; ++i) {
            forward_one(x.row(i), conv, pooled, arg);
            for (int c = 0; c < k_; ++c) {
                double s = bo_[c];
                const double* w = wo_.data() + static_cast<size_t>(c) * ch_;
                for (int j = 0; j < ch_; ++j) s += w[j] * pooled[j];
                z[c] = s;
            }
            out[i] = detail::argmax_lowest(z.data(), k_);
        }
        return out;
    }

    json params_json() const override {
        return {{"wc", wc_}, {"bc", bc_}, {"wo", wo_}, {"bo", bo_},
                {"channels", ch_}, {"seq_len", seq_len_}, {"num_classes", k_}};
    }
    void load_params(const json& j) override {
        wc_ = j.at("wc").get<std::vector<double>>();
        bc_ = j.at("bc").get<std::vector<double>>();
        wo_ = j.at("wo").get<std::vector<double>>();
        bo_ = j.at("bo").get<std::vector<double>>();
        ch_ = j.at("channels").get<int>();
        seq_len_ = j.at("seq_len").get<size_t>();
        k_ = j.at("num_classes").get<int>();
    }
    size_t fitted_param_count() const override {
        return wc_.size() + bc_.size() + wo_.size() + bo_.size();
    }

private:
    size_t conv_out_len() const {
        return seq_len_ >= kKernel ? seq_len_ - kKernel + 1 : 1;  // zero-pad tiny inputs
    }

    void forward_one(const double* x, MatD& conv, std::vector<double>& pooled,
                     std::vector<size_t>& arg) const {
        const size_t out_len = conv_out_len();
        for (int j = 0; j < ch_; ++j) {
            const double* w = wc_.data() + static_cast<size_t>(j) * kKernel;
            for (size_t pos = 0; pos < out_len; ++pos) {
                double s = bc_[j];
                for (int t = 0; t < kKernel; ++t)
                    s += w[t] * (pos + t < seq_len_ ? x[pos + t] : 0.0);
                conv.at(j, pos) = s > 0.0 ? s : 0.0;
            }
            size_t best = 0;
            for (size_t pos = 1; pos < out_len; ++pos)
                if (conv.at(j, pos) > conv.at(j, best)) best = pos;
            pooled[j] = conv.at(j, best);
            arg[j] = best;
        }
    }

    int ch_;
    size_t seq_len_ = 0;
    int k_ = 0;
    std::vector<double> wc_, bc_, wo_, bo_;
};

}  // namespace probekit
