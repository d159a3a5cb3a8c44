#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>

#include "storyplot/nn/adam.hpp"
#include "storyplot/nn/gru.hpp"
#include "storyplot/nn/params.hpp"
#include "storyplot/nn/tape.hpp"

using namespace storyplot::nn;
namespace fs = std::filesystem;

namespace {

using Build = std::function<Var(Tape&)>;

double eval(const Build& build) {
    Tape t;
    return build(t).scalar();
}

// Central differences against every entry of every listed tensor.
void check_grads(const Build& build, const std::vector<Tensor*>& leaves,
                 double tol = 1e-6, double h = 1e-5) {
    for (Tensor* p : leaves) p->grad.setZero();
    Tape t;
    Var loss = build(t);
    t.backward(loss);
    for (Tensor* p : leaves) {
        for (Eigen::Index i = 0; i < p->value.rows(); ++i) {
            for (Eigen::Index j = 0; j < p->value.cols(); ++j) {
                const double orig = p->value(i, j);
                p->value(i, j) = orig + h;
                const double fp = eval(build);
                p->value(i, j) = orig - h;
                const double fm = eval(build);
                p->value(i, j) = orig;
                const double num = (fp - fm) / (2.0 * h);
                const double ana = p->grad(i, j);
                const double denom = std::max({std::abs(num), std::abs(ana), 1e-6});
                INFO(p->name, "(", i, ",", j, ") analytic=", ana, " numeric=", num);
                CHECK(std::abs(num - ana) / denom < tol);
            }
        }
    }
}

Tensor make_tensor(const std::string& name, Eigen::Index r, Eigen::Index c, Rng& rng,
                   double lo = -0.8, double hi = 0.8) {
    Tensor t(name, r, c);
    init_uniform(t, lo, hi, rng);
    return t;
}

fs::path temp_dir() {
    fs::path d = fs::temp_directory_path() / "storyplot_tape_test";
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("quadratic loss gradient equals the point itself") {
    Rng rng(11);
    Tensor x = make_tensor("x", 3, 4, rng, -2.0, 2.0);
    Tape t;
    Var xv = t.leaf(x);
    Var loss = t.scale(t.sum_all(t.cmul(xv, xv)), 0.5);
    t.backward(loss);
    CHECK(loss.scalar() == doctest::Approx(0.5 * x.value.squaredNorm()).epsilon(1e-12));
    CHECK((x.grad - x.value).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("elementwise ops match finite differences") {
    Rng rng(12);
    Tensor a = make_tensor("a", 2, 3, rng);
    Tensor b = make_tensor("b", 2, 3, rng);
    Build build = [&](Tape& t) {
        Var x = t.leaf(a);
        Var y = t.leaf(b);
        Var e = t.add(t.cmul(t.gelu(x), t.tanh(y)), t.sigmoid(t.sub(x, y)));
        return t.sum_all(t.affine(e, 1.3, -0.2));
    };
    check_grads(build, {&a, &b});
}

TEST_CASE("matmul variants match finite differences") {
    Rng rng(13);
    Tensor a = make_tensor("a", 2, 3, rng);
    Tensor b = make_tensor("b", 3, 4, rng);
    Tensor c = make_tensor("c", 2, 4, rng);
    Build build = [&](Tape& t) {
        Var av = t.leaf(a);
        Var bv = t.leaf(b);
        Var cv = t.leaf(c);
        Var m1 = t.matmul(av, bv);              // 2x4
        Var m2 = t.matmul_nt(m1, cv);           // 2x2
        Var m3 = t.matmul_tn(av, m1);           // 3x4
        return t.add(t.sum_all(t.tanh(m2)), t.sum_all(t.gelu(m3)));
    };
    check_grads(build, {&a, &b, &c});
}

TEST_CASE("softmax rows and row-nll") {
    Rng rng(14);
    Tensor logits = make_tensor("logits", 3, 5, rng, -1.5, 1.5);
    const std::vector<int> targets{1, 4, 0};

    SUBCASE("nll value equals summed log-sum-exp minus target logits") {
        Tape t;
        Var loss = t.nll_rows(t.leaf(logits), targets);
        double want = 0.0;
        for (int i = 0; i < 3; ++i) {
            Eigen::VectorXd z = logits.value.row(i).transpose();
            want += log_sum_exp(z) - z(targets[static_cast<std::size_t>(i)]);
        }
        CHECK(loss.scalar() == doctest::Approx(want).epsilon(1e-12));
    }

    SUBCASE("nll gradient") {
        Build build = [&](Tape& t) { return t.nll_rows(t.leaf(logits), targets); };
        check_grads(build, {&logits});
    }

    SUBCASE("softmax rows sum to one and backprop is correct") {
        Tape t0;
        Var y0 = t0.softmax_rows(t0.leaf(logits));
        for (int i = 0; i < 3; ++i) {
            CHECK(y0.value().row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
        }
        Rng rng2(15);
        Tensor w = make_tensor("w", 3, 5, rng2);
        Build build = [&](Tape& t) {
            return t.sum_all(t.cmul(t.softmax_rows(t.leaf(logits)), t.constant(w.value)));
        };
        check_grads(build, {&logits});
    }
}

TEST_CASE("layer norm") {
    Rng rng(16);
    Tensor x = make_tensor("x", 2, 6, rng, -1.2, 1.2);
    Tensor gain = make_tensor("gain", 1, 6, rng, 0.5, 1.5);
    Tensor bias = make_tensor("bias", 1, 6, rng, -0.3, 0.3);

    SUBCASE("unit gain and zero bias standardize each row") {
        Tensor g1("g1", 1, 6);
        g1.value.setOnes();
        Tensor b0("b0", 1, 6);
        Tape t;
        Var y = t.layer_norm(t.leaf(x), t.leaf(g1), t.leaf(b0));
        for (int i = 0; i < 2; ++i) {
            CHECK(y.value().row(i).mean() == doctest::Approx(0.0).epsilon(1e-10));
            double var = y.value().row(i).array().square().mean();
            CHECK(var == doctest::Approx(1.0).epsilon(1e-4));  // eps shrinks it slightly
        }
    }

    SUBCASE("gradient through x, gain and bias") {
        Rng rng2(17);
        Tensor w = make_tensor("w", 2, 6, rng2);
        Build build = [&](Tape& t) {
            Var y = t.layer_norm(t.leaf(x), t.leaf(gain), t.leaf(bias));
            return t.sum_all(t.cmul(y, t.constant(w.value)));
        };
        check_grads(build, {&x, &gain, &bias}, 5e-6);
    }
}

TEST_CASE("gather, concat, slice and broadcast ops") {
    Rng rng(18);
    Tensor table = make_tensor("table", 7, 4, rng);
    Tensor brow = make_tensor("brow", 1, 4, rng);
    const std::vector<int> ids{3, 0, 3, 6};  // repeated id exercises accumulation
    Rng rng2(19);
    const Mat pad_v = make_tensor("pv", 2, 4, rng2).value;
    const Mat pad_h = make_tensor("ph", 6, 2, rng2).value;

    Build build = [&](Tape& t) {
        Var g = t.rows(t.leaf(table), ids);
        Var y = t.add_rowwise(g, t.leaf(brow));
        Var v = t.vconcat({y, t.constant(pad_v)});
        Var wide = t.hconcat({v, t.constant(pad_h)});
        Var s = t.slice_cols(wide, 1, 3);
        Var r = t.row(s, 2);
        return t.add(t.sum_all(t.cmul(s, s)), t.sum_all(t.gelu(r)));
    };
    check_grads(build, {&table, &brow});

    Tape t;
    Var g = t.rows(t.leaf(table), ids);
    CHECK(g.rows() == 4);
    CHECK((g.value().row(0) - table.value.row(3)).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g.value().row(3) - table.value.row(6)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("binary cross entropy on a logit") {
    Tensor z("z", 1, 1);
    z.value(0, 0) = 0.3;

    SUBCASE("value is softplus(z) - t*z") {
        for (double target : {0.0, 1.0}) {
            Tape t;
            Var loss = t.bce_with_logit(t.leaf(z), target);
            double sp = std::log1p(std::exp(-std::abs(0.3))) + std::max(0.3, 0.0);
            CHECK(loss.scalar() == doctest::Approx(sp - target * 0.3).epsilon(1e-12));
        }
    }

    SUBCASE("zero logit against positive target gives ln 2") {
        z.value(0, 0) = 0.0;
        Tape t;
        CHECK(t.bce_with_logit(t.leaf(z), 1.0).scalar() ==
              doctest::Approx(std::log(2.0)).epsilon(1e-15));
    }

    SUBCASE("gradient") {
        for (double target : {0.0, 1.0}) {
            Build build = [&](Tape& t) { return t.bce_with_logit(t.leaf(z), target); };
            check_grads(build, {&z});
        }
    }
}

TEST_CASE("add_n fans gradients out to every term") {
    Rng rng(20);
    Tensor a = make_tensor("a", 2, 2, rng);
    Tensor b = make_tensor("b", 2, 2, rng);
    Tensor c = make_tensor("c", 2, 2, rng);
    Build build = [&](Tape& t) {
        return t.sum_all(t.add_n({t.leaf(a), t.leaf(b), t.leaf(c)}));
    };
    check_grads(build, {&a, &b, &c});
    Tape t;
    Var s = t.add_n({t.leaf(a), t.leaf(b), t.leaf(c)});
    CHECK((s.value() - (a.value + b.value + c.value)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gru step matches finite differences") {
    ParamSet ps;
    Rng rng(21);
    GruCell cell = GruCell::create(ps, "gru", 3, 4, rng);
    Tensor x0 = make_tensor("x0", 1, 3, rng);
    Tensor x1 = make_tensor("x1", 1, 3, rng);
    Tensor h0 = make_tensor("h0", 1, 4, rng);
    Build build = [&](Tape& t) {
        Var h1 = cell.step(t, t.leaf(x0), t.leaf(h0));
        Var h2 = cell.step(t, t.leaf(x1), h1);
        return t.sum_all(t.cmul(h2, h2));
    };
    std::vector<Tensor*> leaves = ps.all();
    leaves.push_back(&x0);
    leaves.push_back(&x1);
    leaves.push_back(&h0);
    check_grads(build, leaves, 5e-6);
}

TEST_CASE("adam minimizes a quadratic, deterministically") {
    auto run = [](Mat& out) {
        Tensor w("w", 1, 5);
        w.value << 1.0, -2.0, 0.5, 3.0, -0.25;
        Mat target(1, 5);
        target << 0.2, 0.4, -.6, 0.8, -1.0;
        Adam opt(AdamConfig{.lr = 0.05});
        double last = 0.0;
        for (int it = 0; it < 400; ++it) {
            Tape t;
            Var d = t.sub(t.leaf(w), t.constant(target));
            Var loss = t.sum_all(t.cmul(d, d));
            t.backward(loss);
            opt.step({&w});
            last = loss.scalar();
        }
        out = w.value;
        return last;
    };
    Mat w1, w2;
    double l1 = run(w1);
    double l2 = run(w2);
    CHECK(l1 < 1e-8);
    CHECK((w1 - w2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("checkpoint round trip is exact") {
    ParamSet ps;
    Rng rng(22);
    init_uniform(ps.add("enc.w", 4, 6), -1.0, 1.0, rng);
    init_uniform(ps.add("enc.b", 1, 6), -1.0, 1.0, rng);
    init_uniform(ps.add("head", 6, 2), -1.0, 1.0, rng);

    std::vector<Mat> saved;
    for (const Tensor* t : std::as_const(ps).all()) saved.push_back(t->value);

    fs::path prefix = temp_dir() / "roundtrip";
    save_checkpoint(ps, prefix.string());

    for (Tensor* t : ps.all()) t->value.setConstant(99.0);
    load_checkpoint(ps, prefix.string());

    std::size_t k = 0;
    for (Tensor* t : ps.all()) {
        CHECK((t->value - saved[k]).cwiseAbs().maxCoeff() == 0.0);
        ++k;
    }
}

TEST_CASE("checkpoint loading rejects mismatches") {
    ParamSet ps;
    Rng rng(23);
    init_uniform(ps.add("w", 3, 3), -1.0, 1.0, rng);
    fs::path prefix = temp_dir() / "mismatch";
    save_checkpoint(ps, prefix.string());

    SUBCASE("name absent from the target set") {
        ParamSet other;
        other.add("different", 3, 3);
        CHECK_THROWS(load_checkpoint(other, prefix.string()));
    }
    SUBCASE("shape differs") {
        ParamSet other;
        other.add("w", 3, 4);
        CHECK_THROWS(load_checkpoint(other, prefix.string()));
    }
    SUBCASE("target has an extra tensor the file lacks") {
        ParamSet other;
        other.add("w", 3, 3);
        other.add("extra", 2, 2);
        CHECK_THROWS(load_checkpoint(other, prefix.string()));
    }
    SUBCASE("truncated payload") {
        fs::path bin = prefix;
        bin += ".bin";
        auto size = fs::file_size(bin);
        fs::resize_file(bin, size / 2);
        ParamSet other;
        other.add("w", 3, 3);
        CHECK_THROWS(load_checkpoint(other, prefix.string()));
    }
}

TEST_CASE("stable softmax helpers") {
    Eigen::VectorXd z(3);
    z << 1000.0, 1000.0, -1000.0;
    CHECK(log_sum_exp(z) == doctest::Approx(1000.0 + std::log(2.0)).epsilon(1e-12));
    Eigen::VectorXd p = softmax_vector(z);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p(0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(p(2) == doctest::Approx(0.0).epsilon(1e-12));
}
