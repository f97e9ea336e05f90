#include "eegrecon/layers.hpp"

#include "eegrecon/errors.hpp"

#include <cmath>

namespace eegrecon {

Eigen::Index ParamStore::add(std::string name, std::vector<Eigen::Index> dims) {
    Eigen::Index n = 1;
    for (auto d : dims) n *= d;
    Entry e;
    e.name = std::move(name);
    e.dims = std::move(dims);
    e.value = Vec::Zero(n);
    entries_.push_back(std::move(e));
    return static_cast<Eigen::Index>(entries_.size()) - 1;
}

Eigen::Index ParamStore::total_size() const {
    Eigen::Index n = 0;
    for (const auto& e : entries_) n += e.value.size();
    return n;
}

GradBuffer::GradBuffer(const ParamStore& store) {
    g_.reserve(static_cast<std::size_t>(store.count()));
    for (Eigen::Index i = 0; i < store.count(); ++i)
        g_.push_back(Vec::Zero(store.value(i).size()));
}

void GradBuffer::zero() {
    for (auto& v : g_) v.setZero();
}

void GradBuffer::accumulate(const GradBuffer& other) {
    for (std::size_t i = 0; i < g_.size(); ++i) g_[i] += other.g_[i];
}

void GradBuffer::scale(double s) {
    for (auto& v : g_) v *= s;
}

double GradBuffer::squared_norm() const {
    double n = 0.0;
    for (const auto& v : g_) n += v.squaredNorm();
    return n;
}

namespace {

struct ConvGeom {
    Eigen::Index t_in{0}, t_out{0}, pad_l{0}, kernel{1}, stride{1};
};

ConvGeom make_geom(Eigen::Index t, Eigen::Index kernel, Eigen::Index stride,
                   Padding padding) {
    if (t < 1 || kernel < 1 || stride < 1)
        throw ConfigError("conv: invalid geometry");
    ConvGeom g;
    g.t_in = t;
    g.kernel = kernel;
    g.stride = stride;
    if (padding == Padding::same) {
        g.t_out = (t + stride - 1) / stride;
        Eigen::Index total = std::max<Eigen::Index>((g.t_out - 1) * stride + kernel - t, 0);
        g.pad_l = total / 2;
    } else { // valid
        if (t < kernel) throw ConfigError("conv: input shorter than kernel (valid)");
        g.t_out = (t - kernel) / stride + 1;
        g.pad_l = 0;
    }
    return g;
}

// valid output-row range for tap k: rows o with 0 <= o*stride + k - pad_l < t_in
void tap_range(const ConvGeom& g, Eigen::Index k, Eigen::Index& o_lo,
               Eigen::Index& o_hi_excl, Eigen::Index& i0) {
    Eigen::Index off = g.pad_l - k;
    o_lo = off <= 0 ? 0 : (off + g.stride - 1) / g.stride;
    Eigen::Index top = g.t_in - 1 - k + g.pad_l;
    o_hi_excl = top < 0 ? 0 : std::min(g.t_out, top / g.stride + 1);
    i0 = o_lo * g.stride + k - g.pad_l;
}

Mat im2col(const Mat& x, const ConvGeom& g) {
    const Eigen::Index c = x.cols();
    Mat p = Mat::Zero(g.t_out, c * g.kernel);
    for (Eigen::Index ch = 0; ch < c; ++ch) {
        for (Eigen::Index k = 0; k < g.kernel; ++k) {
            Eigen::Index o_lo, o_hi, i0;
            tap_range(g, k, o_lo, o_hi, i0);
            if (o_lo >= o_hi) continue;
            const Eigen::Index len = o_hi - o_lo;
            if (g.stride == 1) {
                p.col(ch * g.kernel + k).segment(o_lo, len) = x.col(ch).segment(i0, len);
            } else {
                Eigen::Map<const Vec, 0, Eigen::InnerStride<>> src(
                    x.col(ch).data() + i0, len, Eigen::InnerStride<>(g.stride));
                p.col(ch * g.kernel + k).segment(o_lo, len) = src;
            }
        }
    }
    return p;
}

void col2im_add(const Mat& p, const ConvGeom& g, Mat& x) {
    const Eigen::Index c = x.cols();
    for (Eigen::Index ch = 0; ch < c; ++ch) {
        for (Eigen::Index k = 0; k < g.kernel; ++k) {
            Eigen::Index o_lo, o_hi, i0;
            tap_range(g, k, o_lo, o_hi, i0);
            if (o_lo >= o_hi) continue;
            const Eigen::Index len = o_hi - o_lo;
            if (g.stride == 1) {
                x.col(ch).segment(i0, len) += p.col(ch * g.kernel + k).segment(o_lo, len);
            } else {
                Eigen::Map<Vec, 0, Eigen::InnerStride<>> dst(
                    x.col(ch).data() + i0, len, Eigen::InnerStride<>(g.stride));
                dst += p.col(ch * g.kernel + k).segment(o_lo, len);
            }
        }
    }
}

void fanin_uniform(Vec& w, Eigen::Index fan_in, SeededRng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
}

class DenseLayer final : public Layer {
public:
    DenseLayer(LayerSpec spec, LayerBuilder& b, const std::string& name)
        : Layer(spec) {
        w_ = b.store().add(name + "/w", {spec.out_ch, spec.in_ch});
        b_ = b.store().add(name + "/b", {spec.out_ch});
    }

    Mat forward(const ParamStore& ps, const Mat& x, RunCtx& ctx) const override {
        if (x.cols() != 1 || x.rows() != spec_.in_ch)
            throw ConfigError("dense: input must be (in x 1)");
        Eigen::Map<const Mat> w(ps.value(w_).data(), spec_.out_ch, spec_.in_ch);
        Mat y(spec_.out_ch, 1);
        y.col(0).noalias() = w * x.col(0);
        y.col(0) += ps.value(b_);
        if (spec_.tanh_act) y = y.array().tanh();
        if (ctx.capture) {
            auto& cache = ctx.caches[slot_].emplace_back();
            cache.in = x;
            if (spec_.tanh_act) cache.out = y;
        }
        return y;
    }

    Mat backward(const ParamStore& ps, const Mat& dy, RunCtx& ctx,
                 GradBuffer& grads) const override {
        auto& stack = ctx.caches[slot_];
        RunCtx::Cache cache = std::move(stack.back());
        stack.pop_back();
        Mat dpre = dy;
        if (spec_.tanh_act)
            dpre.array() *= 1.0 - cache.out.array().square();
        Eigen::Map<const Mat> w(ps.value(w_).data(), spec_.out_ch, spec_.in_ch);
        Eigen::Map<Mat> dw(grads.grad(w_).data(), spec_.out_ch, spec_.in_ch);
        dw.noalias() += dpre.col(0) * cache.in.col(0).transpose();
        grads.grad(b_) += dpre.col(0);
        Mat dx(spec_.in_ch, 1);
        dx.col(0).noalias() = w.transpose() * dpre.col(0);
        return dx;
    }

    void init_params(ParamStore& ps, SeededRng& rng) const override {
        fanin_uniform(ps.value(w_), spec_.in_ch, rng);
        ps.value(b_).setZero();
    }

private:
    Eigen::Index w_{-1}, b_{-1};
};

class Conv1dLayer final : public Layer {
public:
    Conv1dLayer(LayerSpec spec, LayerBuilder& b, const std::string& name)
        : Layer(spec) {
        w_ = b.store().add(name + "/w", {spec.in_ch * spec.kernel, spec.out_ch});
        b_ = b.store().add(name + "/b", {spec.out_ch});
    }

    Mat forward(const ParamStore& ps, const Mat& x, RunCtx& ctx) const override {
        if (x.cols() != spec_.in_ch) throw ConfigError("conv1d: channel mismatch");
        ConvGeom g = make_geom(x.rows(), spec_.kernel, spec_.stride, spec_.padding);
        Mat p = im2col(x, g);
        Eigen::Map<const Mat> w(ps.value(w_).data(), spec_.in_ch * spec_.kernel,
                                spec_.out_ch);
        Mat y(g.t_out, spec_.out_ch);
        y.noalias() = p * w;
        y.rowwise() += ps.value(b_).transpose();
        if (spec_.tanh_act) y = y.array().tanh();
        if (ctx.capture) {
            auto& cache = ctx.caches[slot_].emplace_back();
            cache.in = x;
            if (spec_.tanh_act) cache.out = y;
        }
        return y;
    }

    Mat backward(const ParamStore& ps, const Mat& dy, RunCtx& ctx,
                 GradBuffer& grads) const override {
        auto& stack = ctx.caches[slot_];
        RunCtx::Cache cache = std::move(stack.back());
        stack.pop_back();
        ConvGeom g = make_geom(cache.in.rows(), spec_.kernel, spec_.stride,
                               spec_.padding);
        Mat dpre = dy;
        if (spec_.tanh_act)
            dpre.array() *= 1.0 - cache.out.array().square();
        Mat p = im2col(cache.in, g);
        Eigen::Map<const Mat> w(ps.value(w_).data(), spec_.in_ch * spec_.kernel,
                                spec_.out_ch);
        Eigen::Map<Mat> dw(grads.grad(w_).data(), spec_.in_ch * spec_.kernel,
                           spec_.out_ch);
        dw.noalias() += p.transpose() * dpre;
        grads.grad(b_) += dpre.colwise().sum().transpose();
        Mat dp(g.t_out, spec_.in_ch * spec_.kernel);
        dp.noalias() = dpre * w.transpose();
        Mat dx = Mat::Zero(cache.in.rows(), spec_.in_ch);
        col2im_add(dp, g, dx);
        return dx;
    }

    void init_params(ParamStore& ps, SeededRng& rng) const override {
        fanin_uniform(ps.value(w_), spec_.in_ch * spec_.kernel, rng);
        ps.value(b_).setZero();
    }

private:
    Eigen::Index w_{-1}, b_{-1};
};

class DepthwiseConv1dLayer final : public Layer {
public:
    DepthwiseConv1dLayer(LayerSpec spec, LayerBuilder& b, const std::string& name)
        : Layer(spec) {
        if (spec_.out_ch != spec_.in_ch)
            throw ConfigError("depthwise_conv1d: out channels must equal in channels");
        w_ = b.store().add(name + "/w", {spec.kernel, spec.in_ch});
        b_ = b.store().add(name + "/b", {spec.in_ch});
    }

    Mat forward(const ParamStore& ps, const Mat& x, RunCtx& ctx) const override {
        if (x.cols() != spec_.in_ch)
            throw ConfigError("depthwise_conv1d: channel mismatch");
        ConvGeom g = make_geom(x.rows(), spec_.kernel, spec_.stride, spec_.padding);
        Eigen::Map<const Mat> w(ps.value(w_).data(), spec_.kernel, spec_.in_ch);
        Mat y = Mat::Zero(g.t_out, spec_.in_ch);
        for (Eigen::Index ch = 0; ch < spec_.in_ch; ++ch) {
            for (Eigen::Index k = 0; k < spec_.kernel; ++k) {
                Eigen::Index o_lo, o_hi, i0;
                tap_range(g, k, o_lo, o_hi, i0);
                if (o_lo >= o_hi) continue;
                const Eigen::Index len = o_hi - o_lo;
                if (g.stride == 1) {
                    y.col(ch).segment(o_lo, len) +=
                        w(k, ch) * x.col(ch).segment(i0, len);
                } else {
                    Eigen::Map<const Vec, 0, Eigen::InnerStride<>> src(
                        x.col(ch).data() + i0, len, Eigen::InnerStride<>(g.stride));
                    y.col(ch).segment(o_lo, len) += w(k, ch) * src;
                }
            }
            y.col(ch).array() += ps.value(b_)[ch];
        }
        if (spec_.tanh_act) y = y.array().tanh();
        if (ctx.capture) {
            auto& cache = ctx.caches[slot_].emplace_back();
            cache.in = x;
            if (spec_.tanh_act) cache.out = y;
        }
        return y;
    }

    Mat backward(const ParamStore& ps, const Mat& dy, RunCtx& ctx,
                 GradBuffer& grads) const override {
        auto& stack = ctx.caches[slot_];
        RunCtx::Cache cache = std::move(stack.back());
        stack.pop_back();
        ConvGeom g = make_geom(cache.in.rows(), spec_.kernel, spec_.stride,
                               spec_.padding);
        Mat dpre = dy;
        if (spec_.tanh_act)
            dpre.array() *= 1.0 - cache.out.array().square();
        Eigen::Map<const Mat> w(ps.value(w_).data(), spec_.kernel, spec_.in_ch);
        Eigen::Map<Mat> dw(grads.grad(w_).data(), spec_.kernel, spec_.in_ch);
        Mat dx = Mat::Zero(cache.in.rows(), spec_.in_ch);
        for (Eigen::Index ch = 0; ch < spec_.in_ch; ++ch) {
            for (Eigen::Index k = 0; k < spec_.kernel; ++k) {
                Eigen::Index o_lo, o_hi, i0;
                tap_range(g, k, o_lo, o_hi, i0);
                if (o_lo >= o_hi) continue;
                const Eigen::Index len = o_hi - o_lo;
                if (g.stride == 1) {
                    dw(k, ch) += dpre.col(ch).segment(o_lo, len).dot(
                        cache.in.col(ch).segment(i0, len));
                    dx.col(ch).segment(i0, len) +=
                        w(k, ch) * dpre.col(ch).segment(o_lo, len);
                } else {
                    Eigen::Map<const Vec, 0, Eigen::InnerStride<>> src(
                        cache.in.col(ch).data() + i0, len,
                        Eigen::InnerStride<>(g.stride));
                    dw(k, ch) += dpre.col(ch).segment(o_lo, len).dot(src);
                    Eigen::Map<Vec, 0, Eigen::InnerStride<>> dst(
                        dx.col(ch).data() + i0, len, Eigen::InnerStride<>(g.stride));
                    dst += w(k, ch) * dpre.col(ch).segment(o_lo, len);
                }
            }
            grads.grad(b_)[ch] += dpre.col(ch).sum();
        }
        return dx;
    }

    void init_params(ParamStore& ps, SeededRng& rng) const override {
        fanin_uniform(ps.value(w_), spec_.kernel, rng);
        ps.value(b_).setZero();
    }

private:
    Eigen::Index w_{-1}, b_{-1};
};

// Transposed convolution defined as the adjoint of the matching strided
// convolution (same padding: out = stride * in; full: out = (in-1)*stride
// + kernel, the adjoint of a valid convolution).
class TransposedConv1dLayer final : public Layer {
public:
    TransposedConv1dLayer(LayerSpec spec, LayerBuilder& b, const std::string& name)
        : Layer(spec) {
        if (spec_.padding == Padding::valid)
            throw ConfigError("transposed_conv1d: padding must be same or full");
        w_ = b.store().add(name + "/w", {spec.out_ch * spec.kernel, spec.in_ch});
        b_ = b.store().add(name + "/b", {spec.out_ch});
    }

    Mat forward(const ParamStore& ps, const Mat& x, RunCtx& ctx) const override {
        if (x.cols() != spec_.in_ch)
            throw ConfigError("transposed_conv1d: channel mismatch");
        const Eigen::Index t_out =
            tconv_out_len(x.rows(), spec_.kernel, spec_.stride, spec_.padding);
        ConvGeom g = adjoint_geom(t_out);
        if (g.t_out != x.rows())
            throw NumericError("transposed_conv1d: inconsistent geometry");
        Eigen::Map<const Mat> w(ps.value(w_).data(), spec_.out_ch * spec_.kernel,
                                spec_.in_ch);
        Mat gmat(x.rows(), spec_.out_ch * spec_.kernel);
        gmat.noalias() = x * w.transpose();
        Mat y = Mat::Zero(t_out, spec_.out_ch);
        col2im_add(gmat, g, y);
        y.rowwise() += ps.value(b_).transpose();
        if (spec_.tanh_act) y = y.array().tanh();
        if (ctx.capture) {
            auto& cache = ctx.caches[slot_].emplace_back();
            cache.in = x;
            if (spec_.tanh_act) cache.out = y;
        }
        return y;
    }

    Mat backward(const ParamStore& ps, const Mat& dy, RunCtx& ctx,
                 GradBuffer& grads) const override {
        auto& stack = ctx.caches[slot_];
        RunCtx::Cache cache = std::move(stack.back());
        stack.pop_back();
        Mat dpre = dy;
        if (spec_.tanh_act)
            dpre.array() *= 1.0 - cache.out.array().square();
        ConvGeom g = adjoint_geom(dy.rows());
        Mat p = im2col(dpre, g); // (t_in, out_ch * kernel)
        Eigen::Map<const Mat> w(ps.value(w_).data(), spec_.out_ch * spec_.kernel,
                                spec_.in_ch);
        Eigen::Map<Mat> dw(grads.grad(w_).data(), spec_.out_ch * spec_.kernel,
                           spec_.in_ch);
        dw.noalias() += p.transpose() * cache.in;
        grads.grad(b_) += dpre.colwise().sum().transpose();
        Mat dx(cache.in.rows(), spec_.in_ch);
        dx.noalias() = p * w;
        return dx;
    }

    void init_params(ParamStore& ps, SeededRng& rng) const override {
        fanin_uniform(ps.value(w_), spec_.in_ch * spec_.kernel, rng);
        ps.value(b_).setZero();
    }

private:
    ConvGeom adjoint_geom(Eigen::Index t_out) const {
        Padding p = spec_.padding == Padding::same ? Padding::same : Padding::valid;
        return make_geom(t_out, spec_.kernel, spec_.stride, p);
    }

    Eigen::Index w_{-1}, b_{-1};
};

class TanhLayer final : public Layer {
public:
    TanhLayer(LayerSpec spec, LayerBuilder&) : Layer(spec) {}

    Mat forward(const ParamStore&, const Mat& x, RunCtx& ctx) const override {
        Mat y = x.array().tanh();
        if (ctx.capture) ctx.caches[slot_].push_back({Mat(), y, Vec()});
        return y;
    }

    Mat backward(const ParamStore&, const Mat& dy, RunCtx& ctx,
                 GradBuffer&) const override {
        auto& stack = ctx.caches[slot_];
        RunCtx::Cache cache = std::move(stack.back());
        stack.pop_back();
        return dy.array() * (1.0 - cache.out.array().square());
    }
};

class SpatialDropoutLayer final : public Layer {
public:
    SpatialDropoutLayer(LayerSpec spec, LayerBuilder&) : Layer(spec) {
        if (spec_.dropout_rate < 0.0 || spec_.dropout_rate >= 1.0)
            throw ConfigError("spatial_dropout: rate must be in [0, 1)");
    }

    Mat forward(const ParamStore&, const Mat& x, RunCtx& ctx) const override {
        if (ctx.mode == Mode::eval || spec_.dropout_rate == 0.0) {
            if (ctx.capture)
                ctx.caches[slot_].push_back({Mat(), Mat(), Vec::Ones(x.cols())});
            return x;
        }
        if (ctx.rng == nullptr)
            throw ConfigError("spatial_dropout: train mode needs an rng");
        const double keep = 1.0 - spec_.dropout_rate;
        Vec mask(x.cols());
        for (Eigen::Index c = 0; c < x.cols(); ++c)
            mask[c] = ctx.rng->uniform() < keep ? 1.0 / keep : 0.0;
        Mat y = x;
        for (Eigen::Index c = 0; c < x.cols(); ++c) y.col(c) *= mask[c];
        if (ctx.capture) ctx.caches[slot_].push_back({Mat(), Mat(), mask});
        return y;
    }

    Mat backward(const ParamStore&, const Mat& dy, RunCtx& ctx,
                 GradBuffer&) const override {
        auto& stack = ctx.caches[slot_];
        RunCtx::Cache cache = std::move(stack.back());
        stack.pop_back();
        Mat dx = dy;
        for (Eigen::Index c = 0; c < dx.cols(); ++c) dx.col(c) *= cache.mask[c];
        return dx;
    }
};

} // namespace

std::unique_ptr<Layer> LayerBuilder::make(const std::string& name,
                                          const LayerSpec& spec) {
    std::unique_ptr<Layer> layer;
    switch (spec.kind) {
        case LayerKind::dense:
            layer = std::make_unique<DenseLayer>(spec, *this, name);
            break;
        case LayerKind::conv1d:
            layer = std::make_unique<Conv1dLayer>(spec, *this, name);
            break;
        case LayerKind::depthwise_conv1d:
            layer = std::make_unique<DepthwiseConv1dLayer>(spec, *this, name);
            break;
        case LayerKind::transposed_conv1d:
            layer = std::make_unique<TransposedConv1dLayer>(spec, *this, name);
            break;
        case LayerKind::tanh_act:
            layer = std::make_unique<TanhLayer>(spec, *this);
            break;
        case LayerKind::spatial_dropout:
            layer = std::make_unique<SpatialDropoutLayer>(spec, *this);
            break;
    }
    layer->slot_ = next_slot_++;
    return layer;
}

Eigen::Index conv_out_len(Eigen::Index t, Eigen::Index kernel, Eigen::Index stride,
                          Padding padding) {
    return make_geom(t, kernel, stride, padding).t_out;
}

Eigen::Index tconv_out_len(Eigen::Index t, Eigen::Index kernel, Eigen::Index stride,
                           Padding padding) {
    if (padding == Padding::same) return t * stride;
    if (padding == Padding::full) return (t - 1) * stride + kernel;
    throw ConfigError("transposed_conv1d: padding must be same or full");
}

} // namespace eegrecon
