#include "eegrecon/trainer.hpp"

#include "eegrecon/adam.hpp"
#include "eegrecon/errors.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

namespace eegrecon {

namespace {

std::string fmt(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void check_sets(const std::vector<WindowSet>& sets) {
    if (sets.empty()) throw DataError("no window sets supplied");
    const WindowSet& first = sets.front();
    for (const WindowSet& ws : sets) {
        if (ws.labels != first.labels)
            throw DataError("window sets disagree on channel labels");
        if (ws.fs_hz != first.fs_hz)
            throw DataError("window sets disagree on sampling rate");
        if (ws.window_len != first.window_len)
            throw DataError("window sets disagree on window length");
    }
}

void item_ref_stats(DataItem& it) {
    const double mean = it.y.mean();
    const double var =
        (it.y.array() - mean).square().sum() / static_cast<double>(it.y.size());
    it.ref_mean = mean;
    it.ref_sd = std::sqrt(var);
}

// per-window pieces kept alive until the pooled latent grads are ready
struct WindowPass {
    ForwardResult fr;
    RunCtx ctx;
    double mse{0.0}, mag{0.0}, phase{0.0}, mob{0.0};
    Vec g_mse, g_mag, g_phase, g_mob;
    Vec y;
};

struct BatchStats {
    LossBreakdown mean;
    TotalLoss tl;
};

LossWeights weights_of(const ParamStore& loss_store) {
    const Vec& s = loss_store.value(0);
    return LossWeights{s[0], s[1]};
}

} // namespace

Dataset assemble_dataset(const std::vector<WindowSet>& sets,
                         const Montage& montage, const TrainPlan& plan) {
    check_sets(sets);
    const WindowSet& first = sets.front();
    const NeighborMap nm =
        build_neighbor_map(montage, first.labels, plan.neighbor_threshold);
    const std::vector<std::string>& neighbors = nm.of(plan.channel);
    const Eigen::Index k = static_cast<Eigen::Index>(neighbors.size());

    Dataset ds;
    ds.neighbor_labels = neighbors;
    std::vector<DataItem> items;
    for (const WindowSet& ws : sets) {
        if (!plan.held_out_subject.empty() && ws.subject == plan.held_out_subject)
            continue;
        const Eigen::Index t_idx = ws.channel_index(plan.channel);
        std::vector<Eigen::Index> nb_idx;
        nb_idx.reserve(neighbors.size());
        for (const std::string& nb : neighbors)
            nb_idx.push_back(ws.channel_index(nb));
        for (Eigen::Index b = 0; b < ws.count(); ++b) {
            if (ws.window_labels[static_cast<std::size_t>(b)] != WindowLabel::clean)
                continue;
            const Mat& w = ws.windows[static_cast<std::size_t>(b)];
            DataItem it;
            it.x.resize(ws.window_len, k);
            for (Eigen::Index j = 0; j < k; ++j)
                it.x.col(j) = w.row(nb_idx[static_cast<std::size_t>(j)]).transpose();
            it.y = w.row(t_idx).transpose();
            it.ref_mean = ws.win_mean(b, t_idx);
            it.ref_sd = ws.win_sd(b, t_idx);
            it.ch_gmean = Vec(k + 1);
            it.ch_gsd = Vec(k + 1);
            it.ch_gmean[0] = ws.global_mean[t_idx];
            it.ch_gsd[0] = ws.global_sd[t_idx];
            for (Eigen::Index j = 0; j < k; ++j) {
                it.ch_gmean[j + 1] = ws.global_mean[nb_idx[static_cast<std::size_t>(j)]];
                it.ch_gsd[j + 1] = ws.global_sd[nb_idx[static_cast<std::size_t>(j)]];
            }
            items.push_back(std::move(it));
        }
    }

    const Eigen::Index n = static_cast<Eigen::Index>(items.size());
    if (n < 2 * plan.batch)
        throw DataError("only " + std::to_string(n) + " clean windows; need at least " +
                        std::to_string(2 * plan.batch));

    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    SeededRng split_rng = SeededRng(plan.seed).derive("split");
    split_rng.shuffle(order);

    Eigen::Index n_val =
        static_cast<Eigen::Index>(std::llround(plan.val_fraction * static_cast<double>(n)));
    if (plan.val_fraction > 0.0 && n_val == 0) n_val = 1;
    if (n_val >= n) throw ConfigError("validation fraction leaves no training data");
    const Eigen::Index n_train = n - n_val;
    ds.train.reserve(static_cast<std::size_t>(n_train));
    ds.val.reserve(static_cast<std::size_t>(n_val));
    for (Eigen::Index i = 0; i < n; ++i) {
        DataItem& it = items[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        if (i < n_train)
            ds.train.push_back(std::move(it));
        else
            ds.val.push_back(std::move(it));
    }
    return ds;
}

void perturb_item(DataItem& item, const PreprocessSettings& s, SeededRng& rng) {
    const auto jitter_col = [&](Vec& col, double gmean, double gsd) {
        const double u = 2.0 * rng.uniform() - 1.0;
        if (s.perturb_mode == PerturbMode::amplitude) {
            const double gain = 1.0 + s.perturb_frac * u;
            col = ((col.array() - gmean) * gain + gmean).matrix();
        } else {
            col.array() += s.perturb_frac * u * gsd;
        }
    };
    jitter_col(item.y, item.ch_gmean[0], item.ch_gsd[0]);
    for (Eigen::Index j = 0; j < item.x.cols(); ++j) {
        Vec col = item.x.col(j);
        jitter_col(col, item.ch_gmean[j + 1], item.ch_gsd[j + 1]);
        item.x.col(j) = col;
    }
    item_ref_stats(item);
}

namespace {

// pooled latent regularizer over one batch of forward results; returns the
// value and fills per-window gradient slices
double pooled_latent(const ModelConfig& cfg, std::vector<WindowPass>& passes,
                     SeededRng& swd_rng, std::vector<LatentGrad>* lgs) {
    const Eigen::Index dim = cfg.latent_dim;
    Eigen::Index rows = 0;
    for (const WindowPass& p : passes) rows += p.fr.mu.rows();

    if (cfg.latent_reg() == LatentReg::kld) {
        Mat mu(rows, dim), lv(rows, dim);
        Eigen::Index r = 0;
        for (const WindowPass& p : passes) {
            mu.middleRows(r, p.fr.mu.rows()) = p.fr.mu;
            lv.middleRows(r, p.fr.logvar.rows()) = p.fr.logvar;
            r += p.fr.mu.rows();
        }
        Mat d_mu, d_lv;
        const double value =
            kld_latent(mu, lv, lgs ? &d_mu : nullptr, lgs ? &d_lv : nullptr);
        if (lgs) {
            r = 0;
            for (std::size_t i = 0; i < passes.size(); ++i) {
                const Eigen::Index nr = passes[i].fr.mu.rows();
                (*lgs)[i].d_mu = d_mu.middleRows(r, nr);
                (*lgs)[i].d_logvar = d_lv.middleRows(r, nr);
                (*lgs)[i].d_z = Mat::Zero(nr, dim);
                r += nr;
            }
        }
        return value;
    }

    Mat z(rows, dim);
    Eigen::Index r = 0;
    for (const WindowPass& p : passes) {
        z.middleRows(r, p.fr.z.rows()) = p.fr.z;
        r += p.fr.z.rows();
    }
    Mat d_z;
    const double value =
        swd_latent(z, cfg.swd_projections, swd_rng, lgs ? &d_z : nullptr);
    if (lgs) {
        r = 0;
        for (std::size_t i = 0; i < passes.size(); ++i) {
            const Eigen::Index nr = passes[i].fr.z.rows();
            (*lgs)[i].d_mu = Mat::Zero(nr, dim);
            (*lgs)[i].d_logvar = Mat::Zero(nr, dim);
            (*lgs)[i].d_z = d_z.middleRows(r, nr);
            r += nr;
        }
    }
    return value;
}

void window_components(WindowPass& p, bool with_grad) {
    Vec* gm = with_grad ? &p.g_mse : nullptr;
    Vec* ga = with_grad ? &p.g_mag : nullptr;
    Vec* gp = with_grad ? &p.g_phase : nullptr;
    Vec* gb = with_grad ? &p.g_mob : nullptr;
    p.mse = temporal_mse(p.y, p.fr.output, gm);
    p.mag = magnitude_mse(p.y, p.fr.output, ga);
    p.phase = phase_mse(p.y, p.fr.output, gp);
    p.mob = mobility_loss(p.y, p.fr.output, gb);
}

} // namespace

TrainResult train_channel(const std::vector<WindowSet>& sets,
                          const Montage& montage, const ModelConfig& cfg,
                          const TrainPlan& plan) {
    check_sets(sets);
    if (sets.front().window_len != cfg.window)
        throw ConfigError("window set length " + std::to_string(sets.front().window_len) +
                          " does not match the model window " +
                          std::to_string(cfg.window));
    validate_config(cfg);

    Dataset ds = assemble_dataset(sets, montage, plan);
    const Eigen::Index k = static_cast<Eigen::Index>(ds.neighbor_labels.size());
    ModelInstance model(cfg, k);

    SeededRng root(plan.seed);
    SeededRng init_rng = root.derive("init");
    model.init_params(init_rng);

    ParamStore loss_store;
    loss_store.add("loss/s", {2});
    loss_store.value(0).setZero();

    AdamState opt_model = make_adam(model.store(), plan.lr);
    AdamState opt_loss = make_adam(loss_store, plan.lr);
    GradBuffer g_model(model.store());
    GradBuffer g_loss(loss_store);

    EarlyStopper stopper{plan.patience};
    ParamStore best_params = model.store();
    LossWeights best_weights = weights_of(loss_store);

    TrainResult result;
    result.cfg = cfg;
    result.neighbor_labels = ds.neighbor_labels;

    const Eigen::Index n_train = static_cast<Eigen::Index>(ds.train.size());
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n_train));

    for (Eigen::Index epoch = 1; epoch <= plan.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        SeededRng epoch_rng = root.derive("epoch-" + std::to_string(epoch));
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        SeededRng shuffle_rng = epoch_rng.derive("shuffle");
        shuffle_rng.shuffle(order);

        LossBreakdown train_sum;
        Eigen::Index step = 0;
        for (Eigen::Index at = 0; at < n_train; at += plan.batch, ++step) {
            const Eigen::Index bsz = std::min(plan.batch, n_train - at);
            g_model.zero();
            g_loss.zero();

            std::vector<WindowPass> passes(static_cast<std::size_t>(bsz));
            std::vector<SeededRng> wrngs;
            wrngs.reserve(static_cast<std::size_t>(bsz));
            for (Eigen::Index b = 0; b < bsz; ++b) {
                const Eigen::Index idx = order[static_cast<std::size_t>(at + b)];
                wrngs.push_back(epoch_rng.derive("w-" + std::to_string(idx)));
                SeededRng& wrng = wrngs.back();
                DataItem item = ds.train[static_cast<std::size_t>(idx)];
                perturb_item(item, plan.preprocess, wrng);

                WindowPass& p = passes[static_cast<std::size_t>(b)];
                p.ctx.mode = Mode::train;
                p.ctx.capture = true;
                p.ctx.rng = &wrng;
                p.ctx.reset(model.slot_count());
                p.fr = model.forward(item.x, item.ref_mean, item.ref_sd, p.ctx);
                p.y = std::move(item.y);
                window_components(p, true);
            }

            SeededRng swd_rng = epoch_rng.derive("swd-" + std::to_string(step));
            std::vector<LatentGrad> lgs(passes.size());
            LossBreakdown mean;
            for (const WindowPass& p : passes) {
                mean.mse += p.mse;
                mean.magnitude += p.mag;
                mean.phase += p.phase;
                mean.mobility += p.mob;
            }
            const double inv_b = 1.0 / static_cast<double>(bsz);
            mean.mse *= inv_b;
            mean.magnitude *= inv_b;
            mean.phase *= inv_b;
            mean.mobility *= inv_b;
            mean.latent = pooled_latent(cfg, passes, swd_rng, &lgs);

            const LossWeights weights = weights_of(loss_store);
            const TotalLoss tl = total_loss(mean, weights);
            if (!std::isfinite(tl.breakdown.total))
                throw NumericError("non-finite training loss at epoch " +
                                   std::to_string(epoch) + " step " +
                                   std::to_string(step));

            for (std::size_t i = 0; i < passes.size(); ++i) {
                WindowPass& p = passes[i];
                Vec d_out = (inv_b *
                             (tl.d_mse * p.g_mse.array() + tl.d_mag * p.g_mag.array() +
                              tl.d_phase * p.g_phase.array() +
                              tl.d_mobility * p.g_mob.array()))
                                .matrix();
                model.backward(p.fr, d_out, lgs[i], p.ctx, g_model);
            }
            Vec& gs = g_loss.grad(0);
            gs[0] = tl.d_s_mse;
            gs[1] = tl.d_s_mag;

            const double joint_sq = g_model.squared_norm() + g_loss.squared_norm();
            const double norm = std::sqrt(joint_sq);
            if (plan.grad_clip > 0.0 && norm > plan.grad_clip) {
                const double s = plan.grad_clip / norm;
                g_model.scale(s);
                g_loss.scale(s);
            }
            adam_step(model.store(), g_model, opt_model);
            adam_step(loss_store, g_loss, opt_loss);

            const double w = static_cast<double>(bsz) / static_cast<double>(n_train);
            train_sum.mse += w * mean.mse;
            train_sum.magnitude += w * mean.magnitude;
            train_sum.phase += w * mean.phase;
            train_sum.mobility += w * mean.mobility;
            train_sum.latent += w * mean.latent;
            train_sum.total += w * tl.breakdown.total;
        }

        // validation: eval mode, z = mu, fixed projection stream
        LossBreakdown val_mean;
        {
            std::vector<WindowPass> passes(ds.val.size());
            for (std::size_t i = 0; i < ds.val.size(); ++i) {
                const DataItem& item = ds.val[i];
                WindowPass& p = passes[i];
                p.ctx.mode = Mode::eval;
                p.ctx.capture = false;
                p.ctx.reset(model.slot_count());
                p.fr = model.forward(item.x, item.ref_mean, item.ref_sd, p.ctx);
                p.y = item.y;
                window_components(p, false);
                val_mean.mse += p.mse;
                val_mean.magnitude += p.mag;
                val_mean.phase += p.phase;
                val_mean.mobility += p.mob;
            }
            const double inv_v = 1.0 / static_cast<double>(ds.val.size());
            val_mean.mse *= inv_v;
            val_mean.magnitude *= inv_v;
            val_mean.phase *= inv_v;
            val_mean.mobility *= inv_v;
            SeededRng val_rng = root.derive("validation");
            val_mean.latent = pooled_latent(cfg, passes, val_rng, nullptr);
        }
        const TotalLoss val_tl = total_loss(val_mean, weights_of(loss_store));
        if (!std::isfinite(val_tl.breakdown.total))
            throw NumericError("non-finite validation loss at epoch " +
                               std::to_string(epoch));

        EpochLog log;
        log.epoch = epoch;
        log.train = train_sum;
        log.val = val_tl.breakdown;
        log.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                         .count();
        result.trace.epochs.push_back(log);

        if (stopper.observe(epoch, val_tl.breakdown.total)) {
            best_params = model.store();
            best_weights = weights_of(loss_store);
        }
        if (stopper.should_stop(epoch)) {
            result.trace.stop_reason = "patience";
            break;
        }
    }
    if (result.trace.stop_reason.empty()) result.trace.stop_reason = "max_epochs";
    result.trace.best_epoch = stopper.best_epoch;
    result.trace.best_val = stopper.best;
    result.params = std::move(best_params);
    result.weights = best_weights;
    return result;
}

void write_training_log(const TrainTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write training log " + path);
    out << "epoch,train_mse,train_magnitude,train_phase,train_mobility,"
           "train_latent,train_total,val_mse,val_magnitude,val_phase,"
           "val_mobility,val_latent,val_total,wall_time_s\n";
    for (const EpochLog& e : trace.epochs) {
        out << e.epoch << ',' << fmt(e.train.mse) << ',' << fmt(e.train.magnitude)
            << ',' << fmt(e.train.phase) << ',' << fmt(e.train.mobility) << ','
            << fmt(e.train.latent) << ',' << fmt(e.train.total) << ','
            << fmt(e.val.mse) << ',' << fmt(e.val.magnitude) << ','
            << fmt(e.val.phase) << ',' << fmt(e.val.mobility) << ','
            << fmt(e.val.latent) << ',' << fmt(e.val.total) << ','
            << fmt(e.wall_s) << '\n';
    }
}

Reconstruction reconstruct_channel(const ModelInstance& model, const WindowSet& ws,
                                   const std::string& channel,
                                   const std::vector<std::string>& neighbor_labels,
                                   ReferenceMode mode, double alpha) {
    if (ws.window_len != model.config().window)
        throw ConfigError("window set length does not match the model window");
    const Eigen::Index k = static_cast<Eigen::Index>(neighbor_labels.size());
    if (k != model.neighbor_count())
        throw ConfigError("model expects " + std::to_string(model.neighbor_count()) +
                          " neighbors, got " + std::to_string(k));
    const Eigen::Index t_idx = ws.channel_index(channel);
    std::vector<Eigen::Index> nb_idx;
    nb_idx.reserve(neighbor_labels.size());
    for (const std::string& nb : neighbor_labels)
        nb_idx.push_back(ws.channel_index(nb));

    const ReferenceStats ref = track_reference(ws, channel, mode, alpha);
    Reconstruction rec;
    rec.labels = ws.window_labels;
    rec.ref_mean = ref.mean;
    rec.ref_sd = ref.sd;
    rec.original.reserve(static_cast<std::size_t>(ws.count()));
    rec.output.reserve(static_cast<std::size_t>(ws.count()));
    Mat x(ws.window_len, k);
    RunCtx ctx;
    for (Eigen::Index b = 0; b < ws.count(); ++b) {
        const Mat& w = ws.windows[static_cast<std::size_t>(b)];
        for (Eigen::Index j = 0; j < k; ++j)
            x.col(j) = w.row(nb_idx[static_cast<std::size_t>(j)]).transpose();
        ctx.mode = Mode::eval;
        ctx.capture = false;
        ctx.rng = nullptr;
        ctx.reset(model.slot_count());
        ForwardResult fr = model.forward(x, ref.mean[b], ref.sd[b], ctx);
        rec.original.push_back(w.row(t_idx).transpose());
        rec.output.push_back(std::move(fr.output));
    }
    return rec;
}

} // namespace eegrecon
