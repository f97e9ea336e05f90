#pragma once

#include "eegrecon/rng.hpp"

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

namespace eegrecon {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Named flat parameter blocks. Layers reference entries by index, so a
// gradient buffer is just a parallel array and optimizer state never has to
// know layer internals. Values are f64 throughout.
class ParamStore {
public:
    struct Entry {
        std::string name;
        std::vector<Eigen::Index> dims;
        Vec value;
    };

    Eigen::Index add(std::string name, std::vector<Eigen::Index> dims);
    Eigen::Index count() const { return static_cast<Eigen::Index>(entries_.size()); }
    Entry& entry(Eigen::Index i) { return entries_[static_cast<std::size_t>(i)]; }
    const Entry& entry(Eigen::Index i) const { return entries_[static_cast<std::size_t>(i)]; }
    Vec& value(Eigen::Index i) { return entries_[static_cast<std::size_t>(i)].value; }
    const Vec& value(Eigen::Index i) const { return entries_[static_cast<std::size_t>(i)].value; }
    Eigen::Index total_size() const;

private:
    std::vector<Entry> entries_;
};

class GradBuffer {
public:
    GradBuffer() = default;
    explicit GradBuffer(const ParamStore& store);
    void zero();
    Vec& grad(Eigen::Index i) { return g_[static_cast<std::size_t>(i)]; }
    const Vec& grad(Eigen::Index i) const { return g_[static_cast<std::size_t>(i)]; }
    Eigen::Index count() const { return static_cast<Eigen::Index>(g_.size()); }
    void accumulate(const GradBuffer& other);
    void scale(double s);
    double squared_norm() const;

private:
    std::vector<Vec> g_;
};

enum class Mode { train, eval };

// Per-call state for one forward/backward pass. Caches are stacks keyed by
// layer slot so a shared-weight layer applied n times pops its n cached
// activations in reverse order during backward.
struct RunCtx {
    Mode mode{Mode::eval};
    bool capture{false}; // record caches for a later backward pass
    SeededRng* rng{nullptr};

    struct Cache {
        Mat in;
        Mat out;
        Vec mask;
    };
    std::vector<std::vector<Cache>> caches;

    void reset(std::size_t slots) {
        caches.assign(slots, {});
    }
};

enum class LayerKind {
    dense,
    conv1d,
    depthwise_conv1d,
    transposed_conv1d,
    tanh_act,
    spatial_dropout,
};

enum class Padding { same, valid, full };

struct LayerSpec {
    LayerKind kind{LayerKind::dense};
    Eigen::Index in_ch{1};
    Eigen::Index out_ch{1};
    Eigen::Index kernel{1};
    Eigen::Index stride{1}; // upsample factor for transposed_conv1d
    Padding padding{Padding::same};
    bool tanh_act{false};
    double dropout_rate{0.0};
};

// Layers operate on (time x channels) matrices, column-major so one channel
// is contiguous. Dense layers take flat (n x 1) input. forward is const and
// thread-safe; backward consumes the caches pushed by a capturing forward
// and accumulates parameter gradients into ctx-supplied GradBuffer.
class Layer {
public:
    virtual ~Layer() = default;
    virtual Mat forward(const ParamStore& ps, const Mat& x, RunCtx& ctx) const = 0;
    virtual Mat backward(const ParamStore& ps, const Mat& dy, RunCtx& ctx,
                         GradBuffer& grads) const = 0;
    virtual void init_params(ParamStore& ps, SeededRng& rng) const {}
    const LayerSpec& spec() const { return spec_; }

protected:
    explicit Layer(LayerSpec spec) : spec_(spec) {}
    LayerSpec spec_;
    std::size_t slot_{0};
    friend class LayerBuilder;
};

// assigns parameter entries and cache slots; one builder per model
class LayerBuilder {
public:
    explicit LayerBuilder(ParamStore& store) : store_(store) {}
    std::unique_ptr<Layer> make(const std::string& name, const LayerSpec& spec);
    std::size_t slot_count() const { return next_slot_; }
    ParamStore& store() { return store_; }

private:
    ParamStore& store_;
    std::size_t next_slot_{0};
};

// output length of a strided convolution over a segment of length t
Eigen::Index conv_out_len(Eigen::Index t, Eigen::Index kernel, Eigen::Index stride,
                          Padding padding);
// output length of a transposed convolution (same: t * stride, full:
// (t - 1) * stride + kernel)
Eigen::Index tconv_out_len(Eigen::Index t, Eigen::Index kernel, Eigen::Index stride,
                           Padding padding);

} // namespace eegrecon
