#pragma once

#include "eegrecon/layers.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace eegrecon {

enum class Variant { A, B, C, D };

Variant variant_from_string(const std::string& s);
std::string variant_to_string(Variant v);

// A/B pool the encoder output into one latent vector; C/D draw one latent
// per sliding frame of the encoder output.
enum class LatentKind { fixed, sliding };
// A regularizes with closed-form KLD; B/C/D with sliced Wasserstein.
enum class LatentReg { kld, swd };
// base decoding back to the encoder output shape: one wide dense (A/B),
// shared per-frame dense with overlap-add (C), transposed conv over the
// frame axis (D)
enum class BaseDecode { dense, frame_dense, frame_tconv };

// one encoder or decoder stage; sub_win partitions the output timeline and
// zero padding stays confined to each sub-window
struct SubWindowSpec {
    Eigen::Index filters{1};
    Eigen::Index in_len{0};
    double fs_feature{0.0}; // feature-domain sampling rate, Hz
    Eigen::Index kernel{1};
    Eigen::Index sub_win{1};
    bool upsample{false}; // tabulated stride 0.5: stride-2 transposed conv
    Eigen::Index stride{1};
    Eigen::Index out_len{0};

    double carrier_hz() const { return fs_feature / static_cast<double>(kernel); }
    double envelope_hz() const { return fs_feature / static_cast<double>(sub_win); }
};

struct ModelConfig {
    Variant variant{Variant::D};
    Eigen::Index window{256};
    Eigen::Index latent_dim{32};
    Eigen::Index slide_win{4};
    Eigen::Index slide_stride{1};
    Eigen::Index base_kernel{4}; // frame tconv kernel (variant D)
    Eigen::Index swd_projections{50};
    double outlier_z{3.5};
    double scale_jitter{0.1};
    bool neighbor_dropout{true};
    std::vector<SubWindowSpec> encoder;
    std::vector<SubWindowSpec> decoder;

    LatentKind latent_kind() const {
        return (variant == Variant::A || variant == Variant::B) ? LatentKind::fixed
                                                                : LatentKind::sliding;
    }
    LatentReg latent_reg() const {
        return variant == Variant::A ? LatentReg::kld : LatentReg::swd;
    }
    BaseDecode base_decode() const {
        switch (variant) {
            case Variant::A:
            case Variant::B: return BaseDecode::dense;
            case Variant::C: return BaseDecode::frame_dense;
            default: return BaseDecode::frame_tconv;
        }
    }
    Eigen::Index enc_len() const { return encoder.back().out_len; }
    Eigen::Index enc_channels() const { return encoder.back().filters; }
    // sliding frame count over the encoder output
    Eigen::Index frames() const {
        return (enc_len() - slide_win) / slide_stride + 1;
    }
    Eigen::Index frame_dim() const { return slide_win * enc_channels(); }

    // full-scale tables (window 256)
    static ModelConfig standard(Variant v);
    // desk-scale gradient-check tables: window 64, filters / 4, latent 8
    static ModelConfig reduced(Variant v);
};

// throws ConfigError on inconsistent tables (length chaining, divisibility)
void validate_config(const ModelConfig& cfg);

struct ParamCount {
    Eigen::Index total{0};
    std::vector<std::pair<std::string, Eigen::Index>> by_block;
};

// trainable parameter count for a model with the given neighbor count;
// loss-weighting scalars are not part of the model store
ParamCount count_parameters(const ModelConfig& cfg, Eigen::Index neighbor_count);

struct ForwardResult {
    Vec output;  // length window
    Mat mu;      // (1 or frames) x latent
    Mat logvar;
    Mat z;
    Mat eps;     // sampling noise, empty in eval mode
    Vec head_out;
    Vec clipped;
    Vec nb_mask; // per-neighbor dropout mask (1 kept, 0 dropped)
    double jitter{1.0};
    double ref_mean{0.0};
    double ref_sd{1.0};
    double clip_mean{0.0};
    double clip_sd{0.0};
    Vec clip_region; // 0 inside, +1 clipped high, -1 clipped low
    double scale_mean{0.0};
    double scale_sd{0.0};
};

// gradients flowing into the latent stage from the regularizer
struct LatentGrad {
    Mat d_mu;
    Mat d_logvar;
    Mat d_z;
};

class ModelInstance {
public:
    ModelInstance(ModelConfig cfg, Eigen::Index neighbor_count);

    void init_params(SeededRng& rng);

    const ModelConfig& config() const { return cfg_; }
    Eigen::Index neighbor_count() const { return k_; }
    ParamStore& store() { return store_; }
    const ParamStore& store() const { return store_; }
    std::size_t slot_count() const { return slots_; }

    // x_neighbors is (window x k), one column per neighbor channel, ordered
    // by the neighbor map. ref_mean/ref_sd drive the output rescaling.
    ForwardResult forward(const Mat& x_neighbors, double ref_mean, double ref_sd,
                          RunCtx& ctx) const;

    // returns the gradient with respect to x_neighbors
    Mat backward(const ForwardResult& fr, const Vec& d_output,
                 const LatentGrad& lg, RunCtx& ctx, GradBuffer& grads) const;

private:
    struct SubBlock {
        std::unique_ptr<Layer> layer;
        SubWindowSpec spec;
        Mat forward(const ParamStore& ps, const Mat& x, RunCtx& ctx) const;
        Mat backward(const ParamStore& ps, const Mat& dy, RunCtx& ctx,
                     GradBuffer& grads) const;
    };

    Mat encode(const ParamStore& ps, const Mat& x, RunCtx& ctx) const;
    Mat frames_of(const Mat& enc) const;
    Mat frames_adjoint(const Mat& d_frames) const;

    ModelConfig cfg_;
    Eigen::Index k_{0};
    ParamStore store_;
    std::size_t slots_{0};

    std::unique_ptr<Layer> agg_dw_;
    std::unique_ptr<Layer> agg_pw_;
    std::vector<SubBlock> enc_;
    std::unique_ptr<Layer> mu_head_;
    std::unique_ptr<Layer> logvar_head_;
    std::unique_ptr<Layer> base_;
    std::vector<SubBlock> dec_;
    std::unique_ptr<Layer> head_;
};

// Applies one sub-window stage: the output timeline is partitioned into
// out_len / sub_win contiguous segments, each produced from its own input
// segment by an independent application of the layer, so no receptive field
// crosses a sub-window boundary.
Mat subwindow_conv_forward(const Layer& layer, const SubWindowSpec& spec,
                           const ParamStore& ps, const Mat& x, RunCtx& ctx);
Mat subwindow_conv_backward(const Layer& layer, const SubWindowSpec& spec,
                            const ParamStore& ps, const Mat& dy, RunCtx& ctx,
                            GradBuffer& grads);

// clamp to mean +- z * sd of the signal itself; exact piecewise gradient
Vec remove_outlier(const Vec& x, double z, double& mean_out, double& sd_out,
                   Vec& region_out);
Vec remove_outlier_backward(const Vec& x, const Vec& dy, double z, double mean,
                            double sd, const Vec& region);

} // namespace eegrecon
