#include "eegrecon/model.hpp"

#include "eegrecon/errors.hpp"

#include <cmath>
#include <map>

namespace eegrecon {

Variant variant_from_string(const std::string& s) {
    if (s == "A") return Variant::A;
    if (s == "B") return Variant::B;
    if (s == "C") return Variant::C;
    if (s == "D") return Variant::D;
    throw ConfigError("variant must be one of A, B, C, D (got '" + s + "')");
}

std::string variant_to_string(Variant v) {
    switch (v) {
        case Variant::A: return "A";
        case Variant::B: return "B";
        case Variant::C: return "C";
        default: return "D";
    }
}

ModelConfig ModelConfig::standard(Variant v) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.window = 256;
    cfg.latent_dim = 32;
    cfg.slide_win = 4;
    cfg.slide_stride = 1;
    cfg.base_kernel = 4;
    //            filters in    F_S    K  W_S  up  stride out
    cfg.encoder = {{16, 256, 100.0, 5, 8, false, 1, 256},
                   {32, 256, 100.0, 9, 16, false, 2, 128},
                   {64, 128, 50.0, 9, 16, false, 2, 64},
                   {128, 64, 25.0, 7, 64, false, 1, 64}};
    cfg.decoder = {{64, 64, 50.0, 13, 128, true, 1, 128},
                   {32, 128, 100.0, 15, 32, true, 1, 256},
                   {16, 256, 100.0, 9, 16, false, 1, 256},
                   {1, 256, 100.0, 5, 8, false, 1, 256}};
    return cfg;
}

ModelConfig ModelConfig::reduced(Variant v) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.window = 64;
    cfg.latent_dim = 8;
    cfg.slide_win = 4;
    cfg.slide_stride = 1;
    cfg.base_kernel = 4;
    cfg.encoder = {{4, 64, 100.0, 5, 8, false, 1, 64},
                   {8, 64, 100.0, 9, 16, false, 2, 32},
                   {16, 32, 50.0, 9, 16, false, 2, 16},
                   {32, 16, 25.0, 7, 16, false, 1, 16}};
    cfg.decoder = {{16, 16, 50.0, 13, 32, true, 1, 32},
                   {8, 32, 100.0, 15, 32, true, 1, 64},
                   {4, 64, 100.0, 9, 16, false, 1, 64},
                   {1, 64, 100.0, 5, 8, false, 1, 64}};
    return cfg;
}

namespace {

void validate_stage(const SubWindowSpec& s, Eigen::Index expect_in,
                    const std::string& what) {
    if (s.in_len != expect_in)
        throw ConfigError(what + ": input length " + std::to_string(s.in_len) +
                          " does not chain (expected " + std::to_string(expect_in) + ")");
    if (s.filters < 1 || s.kernel < 1 || s.sub_win < 1 || s.out_len < 1)
        throw ConfigError(what + ": non-positive dimension");
    if (s.out_len % s.sub_win != 0)
        throw ConfigError(what + ": output length not divisible by sub-window");
    const Eigen::Index segs = s.out_len / s.sub_win;
    if (s.in_len % segs != 0)
        throw ConfigError(what + ": input length not divisible by segment count");
    const Eigen::Index in_seg = s.in_len / segs;
    if (s.upsample) {
        if (tconv_out_len(in_seg, s.kernel, 2, Padding::same) != s.sub_win)
            throw ConfigError(what + ": upsample stage does not double the segment");
    } else {
        if (conv_out_len(in_seg, s.kernel, s.stride, Padding::same) != s.sub_win)
            throw ConfigError(what + ": conv stage output mismatch");
    }
}

} // namespace

void validate_config(const ModelConfig& cfg) {
    if (cfg.window < 8) throw ConfigError("model: window too small");
    if (cfg.latent_dim < 1) throw ConfigError("model: latent_dim must be >= 1");
    if (cfg.encoder.empty() || cfg.decoder.empty())
        throw ConfigError("model: encoder/decoder tables must be non-empty");
    if (cfg.swd_projections < 1)
        throw ConfigError("model: swd_projections must be >= 1");
    if (!(cfg.outlier_z > 0.0)) throw ConfigError("model: outlier_z must be > 0");
    if (cfg.scale_jitter < 0.0 || cfg.scale_jitter >= 1.0)
        throw ConfigError("model: scale_jitter must be in [0, 1)");

    Eigen::Index len = cfg.window;
    for (std::size_t i = 0; i < cfg.encoder.size(); ++i) {
        validate_stage(cfg.encoder[i], len, "encoder stage " + std::to_string(i + 1));
        len = cfg.encoder[i].out_len;
    }
    for (std::size_t i = 0; i < cfg.decoder.size(); ++i) {
        validate_stage(cfg.decoder[i], len, "decoder stage " + std::to_string(i + 1));
        len = cfg.decoder[i].out_len;
    }
    if (len != cfg.window)
        throw ConfigError("model: decoder does not restore the window length");
    if (cfg.decoder.back().filters != 1)
        throw ConfigError("model: final decoder stage must emit one channel");

    if (cfg.slide_win < 1 || cfg.slide_stride < 1 || cfg.slide_win > cfg.enc_len())
        throw ConfigError("model: invalid sliding window");
    if ((cfg.enc_len() - cfg.slide_win) % cfg.slide_stride != 0)
        throw ConfigError("model: sliding stride does not tile the encoder output");
    if (cfg.latent_kind() == LatentKind::sliding &&
        cfg.base_decode() == BaseDecode::frame_tconv) {
        Eigen::Index out = (cfg.frames() - 1) * cfg.slide_stride + cfg.base_kernel;
        if (out != cfg.enc_len())
            throw ConfigError("model: frame tconv kernel does not restore encoder length");
    }
}

ModelInstance::ModelInstance(ModelConfig cfg, Eigen::Index neighbor_count)
    : cfg_(std::move(cfg)), k_(neighbor_count) {
    validate_config(cfg_);
    if (k_ < 1) throw ConfigError("model: need at least one neighbor channel");

    LayerBuilder b(store_);
    {
        LayerSpec s;
        s.kind = LayerKind::depthwise_conv1d;
        s.in_ch = s.out_ch = k_;
        agg_dw_ = b.make("agg_dw", s);
        s.kind = LayerKind::conv1d;
        s.in_ch = k_;
        s.out_ch = 1;
        agg_pw_ = b.make("agg_pw", s);
    }
    Eigen::Index ch = 1;
    for (std::size_t i = 0; i < cfg_.encoder.size(); ++i) {
        const auto& es = cfg_.encoder[i];
        LayerSpec s;
        s.kind = LayerKind::conv1d;
        s.in_ch = ch;
        s.out_ch = es.filters;
        s.kernel = es.kernel;
        s.stride = es.stride;
        s.tanh_act = true;
        SubBlock blk;
        blk.layer = b.make("enc" + std::to_string(i + 1), s);
        blk.spec = es;
        enc_.push_back(std::move(blk));
        ch = es.filters;
    }

    const Eigen::Index enc_flat = cfg_.enc_len() * cfg_.enc_channels();
    if (cfg_.latent_kind() == LatentKind::fixed) {
        LayerSpec s;
        s.kind = LayerKind::dense;
        s.in_ch = enc_flat;
        s.out_ch = cfg_.latent_dim;
        mu_head_ = b.make("latent_mu", s);
        logvar_head_ = b.make("latent_logvar", s);
    } else {
        LayerSpec s;
        s.kind = LayerKind::conv1d; // kernel-1 conv = shared per-frame dense
        s.in_ch = cfg_.frame_dim();
        s.out_ch = cfg_.latent_dim;
        mu_head_ = b.make("latent_mu", s);
        logvar_head_ = b.make("latent_logvar", s);
    }

    switch (cfg_.base_decode()) {
        case BaseDecode::dense: {
            LayerSpec s;
            s.kind = LayerKind::dense;
            s.in_ch = cfg_.latent_dim;
            s.out_ch = enc_flat;
            base_ = b.make("base", s);
            break;
        }
        case BaseDecode::frame_dense: {
            LayerSpec s;
            s.kind = LayerKind::conv1d;
            s.in_ch = cfg_.latent_dim;
            s.out_ch = cfg_.frame_dim();
            base_ = b.make("base", s);
            break;
        }
        case BaseDecode::frame_tconv: {
            LayerSpec s;
            s.kind = LayerKind::transposed_conv1d;
            s.in_ch = cfg_.latent_dim;
            s.out_ch = cfg_.enc_channels();
            s.kernel = cfg_.base_kernel;
            s.stride = cfg_.slide_stride;
            s.padding = Padding::full;
            base_ = b.make("base", s);
            break;
        }
    }

    ch = cfg_.enc_channels();
    for (std::size_t i = 0; i < cfg_.decoder.size(); ++i) {
        const auto& ds = cfg_.decoder[i];
        LayerSpec s;
        s.in_ch = ch;
        s.out_ch = ds.filters;
        s.kernel = ds.kernel;
        s.tanh_act = true;
        if (ds.upsample) {
            s.kind = LayerKind::transposed_conv1d;
            s.stride = 2;
            s.padding = Padding::same;
        } else {
            s.kind = LayerKind::conv1d;
            s.stride = ds.stride;
        }
        SubBlock blk;
        blk.layer = b.make("dec" + std::to_string(i + 1), s);
        blk.spec = ds;
        dec_.push_back(std::move(blk));
        ch = ds.filters;
    }
    {
        LayerSpec s;
        s.kind = LayerKind::dense;
        s.in_ch = cfg_.window;
        s.out_ch = cfg_.window;
        head_ = b.make("head", s);
    }
    slots_ = b.slot_count();
}

void ModelInstance::init_params(SeededRng& rng) {
    agg_dw_->init_params(store_, rng);
    agg_pw_->init_params(store_, rng);
    for (auto& blk : enc_) blk.layer->init_params(store_, rng);
    mu_head_->init_params(store_, rng);
    logvar_head_->init_params(store_, rng);
    base_->init_params(store_, rng);
    for (auto& blk : dec_) blk.layer->init_params(store_, rng);
    head_->init_params(store_, rng);
}

Mat subwindow_conv_forward(const Layer& layer, const SubWindowSpec& spec,
                           const ParamStore& ps, const Mat& x, RunCtx& ctx) {
    if (x.rows() != spec.in_len)
        throw ConfigError("sub-window block: unexpected input length");
    if (spec.sub_win < 1 || spec.out_len % spec.sub_win != 0)
        throw ConfigError("sub-window block: output length not divisible by sub-window");
    const Eigen::Index segs = spec.out_len / spec.sub_win;
    if (spec.in_len % segs != 0)
        throw ConfigError("sub-window block: input length not divisible by segment count");
    const Eigen::Index in_seg = spec.in_len / segs;
    Mat y(spec.out_len, layer.spec().out_ch);
    for (Eigen::Index s = 0; s < segs; ++s) {
        Mat seg = layer.forward(ps, x.middleRows(s * in_seg, in_seg), ctx);
        if (seg.rows() != spec.sub_win)
            throw NumericError("sub-window block: segment output mismatch");
        y.middleRows(s * spec.sub_win, spec.sub_win) = seg;
    }
    return y;
}

Mat subwindow_conv_backward(const Layer& layer, const SubWindowSpec& spec,
                            const ParamStore& ps, const Mat& dy, RunCtx& ctx,
                            GradBuffer& grads) {
    const Eigen::Index segs = spec.out_len / spec.sub_win;
    const Eigen::Index in_seg = spec.in_len / segs;
    Mat dx(spec.in_len, layer.spec().in_ch);
    for (Eigen::Index s = segs - 1; s >= 0; --s) {
        dx.middleRows(s * in_seg, in_seg) =
            layer.backward(ps, dy.middleRows(s * spec.sub_win, spec.sub_win), ctx, grads);
    }
    return dx;
}

Mat ModelInstance::SubBlock::forward(const ParamStore& ps, const Mat& x,
                                     RunCtx& ctx) const {
    return subwindow_conv_forward(*layer, spec, ps, x, ctx);
}

Mat ModelInstance::SubBlock::backward(const ParamStore& ps, const Mat& dy,
                                      RunCtx& ctx, GradBuffer& grads) const {
    return subwindow_conv_backward(*layer, spec, ps, dy, ctx, grads);
}

Mat ModelInstance::encode(const ParamStore& ps, const Mat& x, RunCtx& ctx) const {
    Mat a = agg_dw_->forward(ps, x, ctx);
    a = agg_pw_->forward(ps, a, ctx);
    for (const auto& blk : enc_) a = blk.forward(ps, a, ctx);
    return a;
}

Mat ModelInstance::frames_of(const Mat& enc) const {
    const Eigen::Index f = cfg_.frames();
    const Eigen::Index w = cfg_.slide_win;
    const Eigen::Index c = enc.cols();
    Mat out(f, w * c);
    for (Eigen::Index i = 0; i < f; ++i)
        for (Eigen::Index ch = 0; ch < c; ++ch)
            for (Eigen::Index t = 0; t < w; ++t)
                out(i, ch * w + t) = enc(i * cfg_.slide_stride + t, ch);
    return out;
}

Mat ModelInstance::frames_adjoint(const Mat& d_frames) const {
    const Eigen::Index f = cfg_.frames();
    const Eigen::Index w = cfg_.slide_win;
    const Eigen::Index c = cfg_.enc_channels();
    Mat out = Mat::Zero(cfg_.enc_len(), c);
    for (Eigen::Index i = 0; i < f; ++i)
        for (Eigen::Index ch = 0; ch < c; ++ch)
            for (Eigen::Index t = 0; t < w; ++t)
                out(i * cfg_.slide_stride + t, ch) += d_frames(i, ch * w + t);
    return out;
}

ForwardResult ModelInstance::forward(const Mat& x_neighbors, double ref_mean,
                                     double ref_sd, RunCtx& ctx) const {
    if (x_neighbors.rows() != cfg_.window || x_neighbors.cols() != k_)
        throw ConfigError("model: input must be (window x neighbor count)");
    if (!(ref_sd > 0.0)) throw DataError("model: reference sd must be > 0");
    ctx.reset(slots_);

    ForwardResult fr;
    fr.ref_mean = ref_mean;
    fr.ref_sd = ref_sd;
    fr.nb_mask = Vec::Ones(k_);
    if (ctx.mode == Mode::train && cfg_.neighbor_dropout) {
        if (!ctx.rng) throw ConfigError("model: train mode requires an rng");
        if (k_ <= 3) {
            if (ctx.rng->uniform() < 0.5)
                fr.nb_mask[static_cast<Eigen::Index>(ctx.rng->uniform_index(
                    static_cast<std::uint64_t>(k_)))] = 0.0;
        } else {
            Eigen::Index drop = ctx.rng->uniform() < 0.5 ? 1 : 2;
            Eigen::Index dropped = 0;
            while (dropped < drop) {
                auto i = static_cast<Eigen::Index>(
                    ctx.rng->uniform_index(static_cast<std::uint64_t>(k_)));
                if (fr.nb_mask[i] != 0.0) {
                    fr.nb_mask[i] = 0.0;
                    ++dropped;
                }
            }
        }
    }
    Mat x0 = x_neighbors;
    for (Eigen::Index c = 0; c < k_; ++c) x0.col(c) *= fr.nb_mask[c];

    Mat e = encode(store_, x0, ctx);

    if (cfg_.latent_kind() == LatentKind::fixed) {
        Mat flat = Eigen::Map<const Mat>(e.data(), e.size(), 1);
        fr.mu = mu_head_->forward(store_, flat, ctx).transpose();     // (1, latent)
        fr.logvar = logvar_head_->forward(store_, flat, ctx).transpose();
    } else {
        Mat f = frames_of(e);
        fr.mu = mu_head_->forward(store_, f, ctx);     // (frames, latent)
        fr.logvar = logvar_head_->forward(store_, f, ctx);
    }

    if (ctx.mode == Mode::train) {
        if (!ctx.rng) throw ConfigError("model: train mode requires an rng");
        fr.eps.resize(fr.mu.rows(), fr.mu.cols());
        for (Eigen::Index j = 0; j < fr.eps.cols(); ++j)
            for (Eigen::Index i = 0; i < fr.eps.rows(); ++i)
                fr.eps(i, j) = ctx.rng->normal();
        fr.z = (fr.mu.array() + (fr.logvar.array() * 0.5).exp() * fr.eps.array()).matrix();
    } else {
        fr.z = fr.mu;
    }

    Mat bmat; // (enc_len, enc_channels)
    switch (cfg_.base_decode()) {
        case BaseDecode::dense: {
            Mat zc = fr.z.transpose(); // (latent, 1)
            Mat bflat = base_->forward(store_, zc, ctx);
            bmat = Eigen::Map<const Mat>(bflat.data(), cfg_.enc_len(),
                                         cfg_.enc_channels());
            break;
        }
        case BaseDecode::frame_dense: {
            Mat g = base_->forward(store_, fr.z, ctx); // (frames, frame_dim)
            bmat = Mat::Zero(cfg_.enc_len(), cfg_.enc_channels());
            Vec counts = Vec::Zero(cfg_.enc_len());
            for (Eigen::Index i = 0; i < cfg_.frames(); ++i)
                counts.segment(i * cfg_.slide_stride, cfg_.slide_win).array() += 1.0;
            for (Eigen::Index i = 0; i < cfg_.frames(); ++i)
                for (Eigen::Index ch = 0; ch < cfg_.enc_channels(); ++ch)
                    for (Eigen::Index t = 0; t < cfg_.slide_win; ++t)
                        bmat(i * cfg_.slide_stride + t, ch) +=
                            g(i, ch * cfg_.slide_win + t);
            for (Eigen::Index t = 0; t < cfg_.enc_len(); ++t)
                bmat.row(t) /= counts[t];
            break;
        }
        case BaseDecode::frame_tconv: {
            bmat = base_->forward(store_, fr.z, ctx);
            break;
        }
    }
    Mat d = bmat;
    for (const auto& blk : dec_) d = blk.forward(store_, d, ctx);

    Mat h = head_->forward(store_, d, ctx);
    fr.head_out = h.col(0);

    fr.clipped = remove_outlier(fr.head_out, cfg_.outlier_z, fr.clip_mean,
                                fr.clip_sd, fr.clip_region);

    fr.jitter = 1.0;
    if (ctx.mode == Mode::train && cfg_.scale_jitter > 0.0) {
        if (!ctx.rng) throw ConfigError("model: train mode requires an rng");
        fr.jitter = ctx.rng->uniform(1.0 - cfg_.scale_jitter, 1.0 + cfg_.scale_jitter);
    }
    fr.scale_mean = fr.clipped.mean();
    fr.scale_sd = std::sqrt((fr.clipped.array() - fr.scale_mean).square().mean());
    if (!(fr.scale_sd > 0.0))
        throw NumericError("model: flat output, cannot rescale");
    fr.output = ((fr.clipped.array() - fr.scale_mean) *
                     (fr.jitter * fr.ref_sd / fr.scale_sd) +
                 fr.ref_mean)
                    .matrix();
    return fr;
}

Mat ModelInstance::backward(const ForwardResult& fr, const Vec& d_output,
                            const LatentGrad& lg, RunCtx& ctx,
                            GradBuffer& grads) const {
    const Eigen::Index n = fr.clipped.size();
    // scale_output backward: y = ref_mean + g * ref_sd * u, u = (c - mean)/sd
    Vec u = ((fr.clipped.array() - fr.scale_mean) / fr.scale_sd).matrix();
    const double factor = fr.jitter * fr.ref_sd / fr.scale_sd;
    const double dmean = d_output.mean();
    const double udot = u.dot(d_output) / static_cast<double>(n);
    Vec d_clip = (factor * (d_output.array() - dmean - u.array() * udot)).matrix();

    Vec d_head = remove_outlier_backward(fr.head_out, d_clip, cfg_.outlier_z,
                                         fr.clip_mean, fr.clip_sd, fr.clip_region);

    Mat dd = head_->backward(store_, d_head, ctx, grads);
    for (auto it = dec_.rbegin(); it != dec_.rend(); ++it)
        dd = it->backward(store_, dd, ctx, grads);

    Mat dz;
    switch (cfg_.base_decode()) {
        case BaseDecode::dense: {
            Mat dflat = Eigen::Map<const Mat>(dd.data(), dd.size(), 1);
            dz = base_->backward(store_, dflat, ctx, grads).transpose(); // (1, latent)
            break;
        }
        case BaseDecode::frame_dense: {
            Vec counts = Vec::Zero(cfg_.enc_len());
            for (Eigen::Index i = 0; i < cfg_.frames(); ++i)
                counts.segment(i * cfg_.slide_stride, cfg_.slide_win).array() += 1.0;
            Mat dg(cfg_.frames(), cfg_.frame_dim());
            for (Eigen::Index i = 0; i < cfg_.frames(); ++i)
                for (Eigen::Index ch = 0; ch < cfg_.enc_channels(); ++ch)
                    for (Eigen::Index t = 0; t < cfg_.slide_win; ++t) {
                        Eigen::Index row = i * cfg_.slide_stride + t;
                        dg(i, ch * cfg_.slide_win + t) = dd(row, ch) / counts[row];
                    }
            dz = base_->backward(store_, dg, ctx, grads);
            break;
        }
        case BaseDecode::frame_tconv: {
            dz = base_->backward(store_, dd, ctx, grads);
            break;
        }
    }
    if (lg.d_z.size() > 0) dz += lg.d_z;

    Mat dmu = dz;
    Mat dlv = Mat::Zero(dz.rows(), dz.cols());
    if (fr.eps.size() > 0)
        dlv = (0.5 * dz.array() * fr.eps.array() * (fr.logvar.array() * 0.5).exp())
                  .matrix();
    if (lg.d_mu.size() > 0) dmu += lg.d_mu;
    if (lg.d_logvar.size() > 0) dlv += lg.d_logvar;

    Mat de;
    if (cfg_.latent_kind() == LatentKind::fixed) {
        Mat dflat = logvar_head_->backward(store_, dlv.transpose(), ctx, grads);
        dflat += mu_head_->backward(store_, dmu.transpose(), ctx, grads);
        de = Eigen::Map<const Mat>(dflat.data(), cfg_.enc_len(), cfg_.enc_channels());
    } else {
        Mat df = logvar_head_->backward(store_, dlv, ctx, grads);
        df += mu_head_->backward(store_, dmu, ctx, grads);
        de = frames_adjoint(df);
    }

    for (auto it = enc_.rbegin(); it != enc_.rend(); ++it)
        de = it->backward(store_, de, ctx, grads);

    Mat da = agg_pw_->backward(store_, de, ctx, grads);
    Mat dx = agg_dw_->backward(store_, da, ctx, grads);
    for (Eigen::Index c = 0; c < k_; ++c) dx.col(c) *= fr.nb_mask[c];
    return dx;
}

Vec remove_outlier(const Vec& x, double z, double& mean_out, double& sd_out,
                   Vec& region_out) {
    const Eigen::Index n = x.size();
    mean_out = x.mean();
    sd_out = std::sqrt((x.array() - mean_out).square().mean());
    region_out = Vec::Zero(n);
    if (!(sd_out > 0.0)) return x;
    const double lo = mean_out - z * sd_out;
    const double hi = mean_out + z * sd_out;
    Vec y = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (x[i] > hi) {
            y[i] = hi;
            region_out[i] = 1.0;
        } else if (x[i] < lo) {
            y[i] = lo;
            region_out[i] = -1.0;
        }
    }
    return y;
}

Vec remove_outlier_backward(const Vec& x, const Vec& dy, double z, double mean,
                            double sd, const Vec& region) {
    const Eigen::Index n = x.size();
    if (!(sd > 0.0)) return dy;
    double sum_clip = 0.0;
    double sum_signed = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (region[i] != 0.0) {
            sum_clip += dy[i];
            sum_signed += region[i] * dy[i];
        }
    }
    Vec dx(n);
    const double nn = static_cast<double>(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double v = region[i] == 0.0 ? dy[i] : 0.0;
        v += sum_clip / nn;
        v += z * sum_signed * (x[i] - mean) / (nn * sd);
        dx[i] = v;
    }
    return dx;
}

ParamCount count_parameters(const ModelConfig& cfg, Eigen::Index neighbor_count) {
    ModelInstance inst(cfg, neighbor_count);
    ParamCount out;
    std::vector<std::string> order;
    std::map<std::string, Eigen::Index> sums;
    const ParamStore& ps = inst.store();
    for (Eigen::Index i = 0; i < ps.count(); ++i) {
        const auto& e = ps.entry(i);
        std::string block = e.name.substr(0, e.name.find('/'));
        if (sums.find(block) == sums.end()) order.push_back(block);
        sums[block] += e.value.size();
        out.total += e.value.size();
    }
    for (const auto& b : order) out.by_block.emplace_back(b, sums[b]);
    return out;
}

} // namespace eegrecon
