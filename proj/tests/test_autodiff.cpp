#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "eegrecon/adam.hpp"
#include "eegrecon/checkpoint.hpp"
#include "eegrecon/errors.hpp"
#include "eegrecon/gradcheck.hpp"
#include "eegrecon/layers.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

using namespace eegrecon;

namespace {

Eigen::Index find_entry(const ParamStore& ps, const std::string& name) {
    for (Eigen::Index i = 0; i < ps.count(); ++i)
        if (ps.entry(i).name == name) return i;
    REQUIRE(false);
    return -1;
}

Mat random_mat(Eigen::Index r, Eigen::Index c, SeededRng& rng) {
    Mat m(r, c);
    for (Eigen::Index j = 0; j < c; ++j)
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = rng.normal();
    return m;
}

void randomize(ParamStore& ps, SeededRng& rng) {
    for (Eigen::Index i = 0; i < ps.count(); ++i)
        for (Eigen::Index j = 0; j < ps.value(i).size(); ++j)
            ps.value(i)[j] = 0.5 * rng.normal();
}

// scalar objective sum(proj .* y) so d loss / d y = proj
double run_layer_loss(const Layer& layer, const ParamStore& ps, const Mat& x,
                      const Mat& proj, std::size_t slots) {
    RunCtx ctx;
    ctx.mode = Mode::eval;
    ctx.reset(slots);
    Mat y = layer.forward(ps, x, ctx);
    return (y.array() * proj.array()).sum();
}

// runs a capturing forward/backward and finite-difference checks both the
// parameter gradients and the input gradient
void check_layer_gradients(Layer& layer, ParamStore& ps, Mat x,
                           std::size_t slots, double tol) {
    SeededRng rng(901);
    RunCtx probe;
    probe.mode = Mode::eval;
    probe.reset(slots);
    Mat y0 = layer.forward(ps, x, probe);
    Mat proj = random_mat(y0.rows(), y0.cols(), rng);

    RunCtx ctx;
    ctx.mode = Mode::eval;
    ctx.capture = true;
    ctx.reset(slots);
    GradBuffer grads(ps);
    layer.forward(ps, x, ctx);
    Mat dx = layer.backward(ps, proj, ctx, grads);

    const double perr = grad_check_params(
        ps, grads, [&] { return run_layer_loss(layer, ps, x, proj, slots); });
    CHECK(perr < tol);

    Vec xflat = Eigen::Map<const Vec>(x.data(), x.size());
    Vec dxflat = Eigen::Map<const Vec>(dx.data(), dx.size());
    const double xerr = grad_check_input(xflat, dxflat, [&] {
        Mat xm = Eigen::Map<const Mat>(xflat.data(), x.rows(), x.cols());
        return run_layer_loss(layer, ps, xm, proj, slots);
    });
    CHECK(xerr < tol);
}

} // namespace

TEST_CASE("dense layer with identity weights passes input through") {
    ParamStore ps;
    LayerBuilder b(ps);
    LayerSpec spec;
    spec.kind = LayerKind::dense;
    spec.in_ch = 5;
    spec.out_ch = 5;
    auto layer = b.make("d", spec);
    Eigen::Map<Mat> w(ps.value(find_entry(ps, "d/w")).data(), 5, 5);
    w.setIdentity();

    SeededRng rng(3);
    Mat x = random_mat(5, 1, rng);
    RunCtx ctx;
    ctx.reset(b.slot_count());
    Mat y = layer->forward(ps, x, ctx);
    CHECK((y - x).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("conv length arithmetic reproduces the table rows") {
    CHECK(conv_out_len(256, 1, 2, Padding::same) == 128);
    CHECK(conv_out_len(256, 9, 2, Padding::same) == 128);
    CHECK(conv_out_len(128, 9, 2, Padding::same) == 64);
    CHECK(conv_out_len(64, 7, 1, Padding::same) == 64);
    CHECK(conv_out_len(10, 3, 1, Padding::valid) == 8);
    CHECK(tconv_out_len(128, 9, 2, Padding::same) == 256);
    CHECK(tconv_out_len(64, 4, 2, Padding::same) == 128);
    CHECK(tconv_out_len(5, 4, 3, Padding::full) == 16);
}

TEST_CASE("conv1d forward matches a naive cross-correlation oracle") {
    ParamStore ps;
    LayerBuilder b(ps);
    LayerSpec spec;
    spec.kind = LayerKind::conv1d;
    spec.in_ch = 2;
    spec.out_ch = 3;
    spec.kernel = 5;
    spec.stride = 2;
    spec.padding = Padding::same;
    auto layer = b.make("c", spec);
    SeededRng rng(44);
    randomize(ps, rng);

    const Eigen::Index t = 16;
    Mat x = random_mat(t, 2, rng);
    RunCtx ctx;
    ctx.reset(b.slot_count());
    Mat y = layer->forward(ps, x, ctx);

    const Eigen::Index t_out = (t + spec.stride - 1) / spec.stride;
    REQUIRE(y.rows() == t_out);
    REQUIRE(y.cols() == 3);
    const Eigen::Index pad_l =
        std::max<Eigen::Index>((t_out - 1) * spec.stride + spec.kernel - t, 0) / 2;
    Eigen::Map<const Mat> w(ps.value(find_entry(ps, "c/w")).data(),
                            spec.in_ch * spec.kernel, spec.out_ch);
    const Vec& bias = ps.value(find_entry(ps, "c/b"));
    for (Eigen::Index o = 0; o < t_out; ++o) {
        for (Eigen::Index oc = 0; oc < 3; ++oc) {
            double acc = bias[oc];
            for (Eigen::Index ic = 0; ic < 2; ++ic) {
                for (Eigen::Index k = 0; k < spec.kernel; ++k) {
                    const Eigen::Index i = o * spec.stride + k - pad_l;
                    if (i < 0 || i >= t) continue;
                    acc += x(i, ic) * w(ic * spec.kernel + k, oc);
                }
            }
            CHECK(y(o, oc) == doctest::Approx(acc).epsilon(1e-12));
        }
    }
}

TEST_CASE("transposed conv1d forward matches the adjoint-scatter oracle") {
    ParamStore ps;
    LayerBuilder b(ps);
    LayerSpec spec;
    spec.kind = LayerKind::transposed_conv1d;
    spec.in_ch = 3;
    spec.out_ch = 2;
    spec.kernel = 4;
    spec.stride = 2;
    spec.padding = Padding::same;
    auto layer = b.make("t", spec);
    SeededRng rng(45);
    randomize(ps, rng);

    const Eigen::Index t_in = 8;
    Mat x = random_mat(t_in, 3, rng);
    RunCtx ctx;
    ctx.reset(b.slot_count());
    Mat y = layer->forward(ps, x, ctx);

    const Eigen::Index t_out = t_in * spec.stride;
    REQUIRE(y.rows() == t_out);
    REQUIRE(y.cols() == 2);
    // adjoint of the same-padded strided conv mapping t_out -> t_in
    const Eigen::Index pad_l =
        std::max<Eigen::Index>((t_in - 1) * spec.stride + spec.kernel - t_out, 0) / 2;
    Eigen::Map<const Mat> w(ps.value(find_entry(ps, "t/w")).data(),
                            spec.out_ch * spec.kernel, spec.in_ch);
    const Vec& bias = ps.value(find_entry(ps, "t/b"));
    Mat want = Mat::Zero(t_out, 2);
    want.rowwise() += bias.transpose();
    for (Eigen::Index o = 0; o < t_in; ++o) {
        for (Eigen::Index k = 0; k < spec.kernel; ++k) {
            const Eigen::Index i = o * spec.stride + k - pad_l;
            if (i < 0 || i >= t_out) continue;
            for (Eigen::Index oc = 0; oc < 2; ++oc)
                for (Eigen::Index ic = 0; ic < 3; ++ic)
                    want(i, oc) += x(o, ic) * w(oc * spec.kernel + k, ic);
        }
    }
    CHECK((y - want).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("tanh backward at zero passes the upstream gradient through") {
    ParamStore ps;
    LayerBuilder b(ps);
    LayerSpec spec;
    spec.kind = LayerKind::tanh_act;
    auto layer = b.make("a", spec);
    Mat x = Mat::Zero(4, 2);
    RunCtx ctx;
    ctx.capture = true;
    ctx.reset(b.slot_count());
    layer->forward(ps, x, ctx);
    GradBuffer grads(ps);
    Mat dy = Mat::Ones(4, 2);
    Mat dx = layer->backward(ps, dy, ctx, grads);
    CHECK((dx - dy).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("dense gradients match finite differences") {
    ParamStore ps;
    LayerBuilder b(ps);
    LayerSpec spec;
    spec.kind = LayerKind::dense;
    spec.in_ch = 7;
    spec.out_ch = 4;
    spec.tanh_act = true;
    auto layer = b.make("d", spec);
    SeededRng rng(7);
    randomize(ps, rng);
    Mat x = random_mat(7, 1, rng);
    check_layer_gradients(*layer, ps, x, b.slot_count(), 1e-6);
}

TEST_CASE("conv1d gradients match finite differences") {
    for (Eigen::Index stride : {1, 2}) {
        for (Padding pad : {Padding::same, Padding::valid}) {
            ParamStore ps;
            LayerBuilder b(ps);
            LayerSpec spec;
            spec.kind = LayerKind::conv1d;
            spec.in_ch = 2;
            spec.out_ch = 3;
            spec.kernel = 5;
            spec.stride = stride;
            spec.padding = pad;
            spec.tanh_act = (stride == 1);
            auto layer = b.make("c", spec);
            SeededRng rng(11 + stride);
            randomize(ps, rng);
            Mat x = random_mat(14, 2, rng);
            check_layer_gradients(*layer, ps, x, b.slot_count(), 1e-5);
        }
    }
}

TEST_CASE("depthwise conv1d gradients match finite differences") {
    ParamStore ps;
    LayerBuilder b(ps);
    LayerSpec spec;
    spec.kind = LayerKind::depthwise_conv1d;
    spec.in_ch = 4;
    spec.out_ch = 4;
    spec.kernel = 3;
    spec.stride = 1;
    spec.padding = Padding::same;
    auto layer = b.make("dw", spec);
    SeededRng rng(13);
    randomize(ps, rng);
    Mat x = random_mat(12, 4, rng);
    check_layer_gradients(*layer, ps, x, b.slot_count(), 1e-5);
}

TEST_CASE("transposed conv1d gradients match finite differences") {
    for (Padding pad : {Padding::same, Padding::full}) {
        ParamStore ps;
        LayerBuilder b(ps);
        LayerSpec spec;
        spec.kind = LayerKind::transposed_conv1d;
        spec.in_ch = 3;
        spec.out_ch = 2;
        spec.kernel = 4;
        spec.stride = 2;
        spec.padding = pad;
        spec.tanh_act = (pad == Padding::same);
        auto layer = b.make("t", spec);
        SeededRng rng(17);
        randomize(ps, rng);
        Mat x = random_mat(9, 3, rng);
        check_layer_gradients(*layer, ps, x, b.slot_count(), 1e-5);
    }
}

TEST_CASE("composed conv stack gradients stay below 1e-4") {
    ParamStore ps;
    LayerBuilder b(ps);
    LayerSpec s1;
    s1.kind = LayerKind::conv1d;
    s1.in_ch = 1;
    s1.out_ch = 4;
    s1.kernel = 5;
    s1.stride = 2;
    s1.tanh_act = true;
    LayerSpec s2;
    s2.kind = LayerKind::conv1d;
    s2.in_ch = 4;
    s2.out_ch = 6;
    s2.kernel = 3;
    s2.stride = 2;
    s2.tanh_act = true;
    LayerSpec s3;
    s3.kind = LayerKind::transposed_conv1d;
    s3.in_ch = 6;
    s3.out_ch = 1;
    s3.kernel = 4;
    s3.stride = 4;
    auto l1 = b.make("s1", s1);
    auto l2 = b.make("s2", s2);
    auto l3 = b.make("s3", s3);
    SeededRng rng(21);
    randomize(ps, rng);
    Mat x = random_mat(16, 1, rng);

    auto run = [&](RunCtx& ctx) {
        return l3->forward(ps, l2->forward(ps, l1->forward(ps, x, ctx), ctx), ctx);
    };
    RunCtx probe;
    probe.reset(b.slot_count());
    Mat y0 = run(probe);
    SeededRng prng(22);
    Mat proj = random_mat(y0.rows(), y0.cols(), prng);

    RunCtx ctx;
    ctx.capture = true;
    ctx.reset(b.slot_count());
    run(ctx);
    GradBuffer grads(ps);
    Mat d3 = l3->backward(ps, proj, ctx, grads);
    Mat d2 = l2->backward(ps, d3, ctx, grads);
    l1->backward(ps, d2, ctx, grads);

    const double err = grad_check_params(ps, grads, [&] {
        RunCtx c2;
        c2.reset(b.slot_count());
        return (run(c2).array() * proj.array()).sum();
    });
    CHECK(err < 1e-4);
}

TEST_CASE("spatial dropout is the identity in eval mode and respects the rate") {
    ParamStore ps;
    LayerBuilder b(ps);
    LayerSpec spec;
    spec.kind = LayerKind::spatial_dropout;
    spec.dropout_rate = 0.4;
    auto layer = b.make("sd", spec);
    SeededRng data_rng(2);
    Mat x = random_mat(20, 6, data_rng);

    RunCtx ev;
    ev.mode = Mode::eval;
    ev.reset(b.slot_count());
    Mat ye = layer->forward(ps, x, ev);
    CHECK((ye - x).cwiseAbs().maxCoeff() == 0.0);

    SeededRng rng(33);
    RunCtx tr;
    tr.mode = Mode::train;
    tr.rng = &rng;
    tr.capture = true;
    tr.reset(b.slot_count());
    Mat yt = layer->forward(ps, x, tr);
    const double keep_scale = 1.0 / (1.0 - spec.dropout_rate);
    int dropped = 0;
    for (Eigen::Index c = 0; c < 6; ++c) {
        const bool zeroed = yt.col(c).cwiseAbs().maxCoeff() == 0.0;
        if (zeroed) {
            ++dropped;
        } else {
            CHECK((yt.col(c) - keep_scale * x.col(c)).cwiseAbs().maxCoeff() < 1e-15);
        }
    }
    CHECK(dropped >= 0);

    // backward reuses the forward mask: zero columns stay zero
    GradBuffer grads(ps);
    Mat dx = layer->backward(ps, Mat::Ones(20, 6), tr, grads);
    for (Eigen::Index c = 0; c < 6; ++c) {
        const bool zeroed = yt.col(c).cwiseAbs().maxCoeff() == 0.0;
        if (zeroed)
            CHECK(dx.col(c).cwiseAbs().maxCoeff() == 0.0);
        else
            CHECK(dx.col(c)[0] == doctest::Approx(keep_scale).epsilon(1e-15));
    }
}

TEST_CASE("spatial dropout preserves the expectation within 2 percent") {
    ParamStore ps;
    LayerBuilder b(ps);
    LayerSpec spec;
    spec.kind = LayerKind::spatial_dropout;
    spec.dropout_rate = 0.3;
    auto layer = b.make("sd", spec);
    Mat x = Mat::Ones(1, 8);
    SeededRng rng(1234);
    Mat acc = Mat::Zero(1, 8);
    const int trials = 10000;
    for (int i = 0; i < trials; ++i) {
        RunCtx tr;
        tr.mode = Mode::train;
        tr.rng = &rng;
        tr.reset(b.slot_count());
        acc += layer->forward(ps, x, tr);
    }
    acc /= static_cast<double>(trials);
    for (Eigen::Index c = 0; c < 8; ++c)
        CHECK(acc(0, c) == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("adam leaves parameters alone under zero gradient") {
    ParamStore ps;
    ps.add("p", {4});
    ps.value(0) << 1.0, -2.0, 3.0, -4.0;
    Vec before = ps.value(0);
    GradBuffer grads(ps);
    AdamState st = make_adam(ps, 0.001);
    adam_step(ps, grads, st);
    CHECK(st.t == 1);
    CHECK((ps.value(0) - before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("adam first step matches the closed form") {
    ParamStore ps;
    ps.add("p", {3});
    ps.value(0) << 0.5, -0.25, 2.0;
    Vec before = ps.value(0);
    GradBuffer grads(ps);
    grads.grad(0) << 0.2, -0.7, 1.3;
    AdamState st = make_adam(ps, 0.001);
    adam_step(ps, grads, st);
    for (Eigen::Index i = 0; i < 3; ++i) {
        const double g = grads.grad(0)[i];
        // bias-corrected m_hat = g, v_hat = g^2 on the first step
        const double want = before[i] - st.lr * g / (std::abs(g) + st.eps);
        CHECK(ps.value(0)[i] == doctest::Approx(want).epsilon(1e-9));
    }
}

TEST_CASE("adam minimizes a quadratic bowl") {
    ParamStore ps;
    ps.add("p", {3});
    ps.value(0).setZero();
    Vec target(3);
    target << 1.3, -0.8, 0.4;
    AdamState st = make_adam(ps, 0.05);
    GradBuffer grads(ps);
    for (int step = 0; step < 500; ++step) {
        grads.zero();
        grads.grad(0) = ps.value(0) - target;
        adam_step(ps, grads, st);
    }
    CHECK((ps.value(0) - target).cwiseAbs().maxCoeff() < 1e-3);
}

TEST_CASE("global norm clipping rescales only above the threshold") {
    ParamStore ps;
    ps.add("a", {2});
    ps.add("b", {2});
    GradBuffer g(ps);
    g.grad(0) << 3.0, 0.0;
    g.grad(1) << 0.0, 4.0; // global norm 5
    double pre = clip_global_norm(g, 2.5);
    CHECK(pre == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(std::sqrt(g.squared_norm()) == doctest::Approx(2.5).epsilon(1e-12));
    CHECK(g.grad(0)[0] == doctest::Approx(1.5).epsilon(1e-12));

    GradBuffer h(ps);
    h.grad(0) << 0.3, 0.4; // norm 0.5, below threshold
    double pre2 = clip_global_norm(h, 2.5);
    CHECK(pre2 == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(h.grad(0)[0] == 0.3);
    CHECK(h.grad(0)[1] == 0.4);
}

TEST_CASE("checkpoints round trip bit-exactly") {
    ParamStore ps;
    ps.add("layer/w", {3, 4});
    ps.add("layer/b", {4});
    ps.add("head/w", {2, 2});
    SeededRng rng(9);
    randomize(ps, rng);

    const std::string path = "ckpt_roundtrip_test.bin";
    save_checkpoint(ps, path);
    ParamStore loaded = load_checkpoint(path);
    REQUIRE(loaded.count() == ps.count());
    for (Eigen::Index i = 0; i < ps.count(); ++i) {
        CHECK(loaded.entry(i).name == ps.entry(i).name);
        CHECK(loaded.entry(i).dims == ps.entry(i).dims);
        CHECK((loaded.value(i) - ps.value(i)).cwiseAbs().maxCoeff() == 0.0);
    }

    ParamStore fresh;
    fresh.add("layer/w", {3, 4});
    fresh.add("layer/b", {4});
    fresh.add("head/w", {2, 2});
    restore_values(fresh, loaded);
    for (Eigen::Index i = 0; i < ps.count(); ++i)
        CHECK((fresh.value(i) - ps.value(i)).cwiseAbs().maxCoeff() == 0.0);

    ParamStore wrong;
    wrong.add("layer/w", {4, 3});
    CHECK_THROWS_AS(restore_values(wrong, loaded), DataError);

    std::filesystem::remove(path);
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
}

TEST_CASE("fixed seeds give bit-identical init, forward, backward and update") {
    auto run_once = [] {
        ParamStore ps;
        LayerBuilder b(ps);
        LayerSpec spec;
        spec.kind = LayerKind::conv1d;
        spec.in_ch = 2;
        spec.out_ch = 3;
        spec.kernel = 3;
        spec.tanh_act = true;
        auto layer = b.make("c", spec);
        SeededRng init(55);
        layer->init_params(ps, init);
        SeededRng data(56);
        Mat x = random_mat(10, 2, data);
        RunCtx ctx;
        ctx.capture = true;
        ctx.reset(b.slot_count());
        Mat y = layer->forward(ps, x, ctx);
        GradBuffer grads(ps);
        layer->backward(ps, y, ctx, grads);
        AdamState st = make_adam(ps, 0.01);
        adam_step(ps, grads, st);
        Vec out(ps.total_size());
        Eigen::Index at = 0;
        for (Eigen::Index i = 0; i < ps.count(); ++i) {
            out.segment(at, ps.value(i).size()) = ps.value(i);
            at += ps.value(i).size();
        }
        return out;
    };
    Vec a = run_once();
    Vec b2 = run_once();
    CHECK((a - b2).cwiseAbs().maxCoeff() == 0.0);
}
