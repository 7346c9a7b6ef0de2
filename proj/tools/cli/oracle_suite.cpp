#include "cli/oracle_suite.hpp"

#include "atl/at_loss.hpp"
#include "atl/layers.hpp"
#include "atl/model_zoo.hpp"
#include "atl/rng.hpp"

#include <cmath>
#include <cstdio>
#include <functional>

namespace atl::cli {

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    Tensor t(shape);
    for (double& v : t.values()) v = rng.uniform(lo, hi);
    return t;
}

double dot(const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Checks d<r, op(x)>/dx against `backward(x, r)` (r random, fixed).
GradcheckReport check_op(const std::string& name, Tensor x, const std::function<Tensor(const Tensor&)>& op,
                         const std::function<Tensor(const Tensor&, const Tensor&)>& backward, Rng& rng,
                         const GradcheckOptions& opt, const BranchSignature& signature = {}) {
    const Tensor r = random_tensor(op(x).shape(), rng);
    const Tensor analytic = backward(x, r);
    auto f = [&](std::span<const double> p) {
        Tensor probe(x.shape());
        std::copy(p.begin(), p.end(), probe.data());
        return dot(r, op(probe));
    };
    auto rep = gradcheck(f, x.values(), analytic.values(), opt, signature);
    rep.name = name;
    return rep;
}

std::uint64_t sign_pattern(std::span<const double> p) {
    std::uint64_t h = 1469598103934665603ULL;
    for (double v : p) h = (h ^ static_cast<std::uint64_t>(v > 0)) * 1099511628211ULL;
    return h;
}

void layer_checks(std::vector<GradcheckReport>& out, Rng& rng, const GradcheckOptions& opt) {
    for (const auto& [stride, pad] : {std::pair{1, 1}, {2, 0}}) {
        const Tensor x = random_tensor({2, 3, 6, 5}, rng);
        const Tensor w = random_tensor({4, 3, 3, 3}, rng);
        const Tensor b = random_tensor({4}, rng);
        const auto tag = "conv2d s" + std::to_string(stride) + " p" + std::to_string(pad);
        out.push_back(check_op(
            tag + " dx", x, [&](const Tensor& v) { return conv2d_forward(v, w, b, stride, pad); },
            [&](const Tensor& v, const Tensor& dy) {
                Tensor dx;
                conv2d_backward(v, w, dy, stride, pad, &dx, nullptr, nullptr);
                return dx;
            },
            rng, opt));
        out.push_back(check_op(
            tag + " dw", w, [&](const Tensor& v) { return conv2d_forward(x, v, b, stride, pad); },
            [&](const Tensor& v, const Tensor& dy) {
                Tensor dw(v.shape());
                conv2d_backward(x, v, dy, stride, pad, nullptr, &dw, nullptr);
                return dw;
            },
            rng, opt));
        out.push_back(check_op(
            tag + " db", b, [&](const Tensor& v) { return conv2d_forward(x, w, v, stride, pad); },
            [&](const Tensor& v, const Tensor& dy) {
                Tensor db(v.shape());
                conv2d_backward(x, w, dy, stride, pad, nullptr, nullptr, &db);
                return db;
            },
            rng, opt));
    }

    const LayerSpec pool = LayerSpec::maxpool2d(3, 2, 0, true);
    out.push_back(check_op(
        "maxpool2d dx", random_tensor({2, 2, 7, 6}, rng), [&](const Tensor& v) { return maxpool2d_forward(v, pool, nullptr); },
        [&](const Tensor& v, const Tensor& dy) {
            std::vector<std::int64_t> argmax;
            maxpool2d_forward(v, pool, &argmax);
            return maxpool2d_backward(v.shape(), dy, argmax);
        },
        rng, opt, [&](std::span<const double> p) {
            Tensor probe({2, 2, 7, 6});
            std::copy(p.begin(), p.end(), probe.data());
            std::vector<std::int64_t> argmax;
            maxpool2d_forward(probe, pool, &argmax);
            std::uint64_t h = 0;
            for (auto a : argmax) h = h * 31 + static_cast<std::uint64_t>(a);
            return h;
        }));

    const Tensor dx_in = random_tensor({3, 5}, rng), dw = random_tensor({4, 5}, rng), db = random_tensor({4}, rng);
    out.push_back(check_op(
        "dense dx", dx_in, [&](const Tensor& v) { return dense_forward(v, dw, db); },
        [&](const Tensor& v, const Tensor& dy) {
            Tensor g;
            dense_backward(v, dw, dy, &g, nullptr, nullptr);
            return g;
        },
        rng, opt));
    out.push_back(check_op(
        "dense dw", dw, [&](const Tensor& v) { return dense_forward(dx_in, v, db); },
        [&](const Tensor& v, const Tensor& dy) {
            Tensor g(v.shape());
            dense_backward(dx_in, v, dy, nullptr, &g, nullptr);
            return g;
        },
        rng, opt));
    out.push_back(check_op(
        "dense db", db, [&](const Tensor& v) { return dense_forward(dx_in, dw, v); },
        [&](const Tensor& v, const Tensor& dy) {
            Tensor g(v.shape());
            dense_backward(dx_in, dw, dy, nullptr, nullptr, &g);
            return g;
        },
        rng, opt));

    out.push_back(check_op(
        "relu", random_tensor({2, 3, 4, 4}, rng), [](const Tensor& v) { return relu_forward(v); },
        [](const Tensor& v, const Tensor& dy) { return relu_backward(v, dy); }, rng, opt, sign_pattern));
    out.push_back(check_op(
        "softmax", random_tensor({3, 5}, rng), [](const Tensor& v) { return softmax_forward(v); },
        [](const Tensor& v, const Tensor& dy) { return softmax_backward(softmax_forward(v), dy); }, rng, opt));
}

void at_piece_checks(std::vector<GradcheckReport>& out, Rng& rng, const OracleOptions& o) {
    const auto& opt = o.gradcheck;
    out.push_back(check_op(
        "gram", random_tensor({2, 4, 3, 5}, rng), [](const Tensor& v) { return gram(v); },
        [](const Tensor& v, const Tensor& dy) { return gram_backward(v, dy); }, rng, opt));
    for (auto kind : {Aggregation::mean, Aggregation::sum, Aggregation::max, Aggregation::comp_mul}) {
        const bool positive = kind == Aggregation::comp_mul;
        BranchSignature sig;
        if (kind == Aggregation::max) {
            sig = [](std::span<const double> p) {
                Tensor probe({2, 3, 4, 4});
                std::copy(p.begin(), p.end(), probe.data());
                const Tensor m = aggregate(probe, Aggregation::max);
                std::uint64_t h = 0;
                for (std::size_t i = 0; i < probe.size(); ++i) {
                    h = h * 31 + (probe[i] == m[(i / 48) * 16 + i % 16]);
                }
                return h;
            };
        }
        out.push_back(check_op(
            "aggregate " + std::string(to_string(kind)), random_tensor({2, 3, 4, 4}, rng, positive ? 0.5 : -1.0, 1.0),
            [kind](const Tensor& v) { return aggregate(v, kind); },
            [kind](const Tensor& v, const Tensor& dy) { return aggregate_backward(v, kind, dy); }, rng, opt, sig));
    }

    for (auto sim : {Similarity::squared_cosine, Similarity::sigmoid_mse}) {
        const auto a = random_tensor({12}, rng), b = random_tensor({12}, rng);
        const auto res = sim == Similarity::squared_cosine ? squared_cosine_with_grad(a.values(), b.values())
                                                           : sigmoid_mse_with_grad(a.values(), b.values());
        auto rep = gradcheck(
            [&](std::span<const double> p) {
                return sim == Similarity::squared_cosine ? squared_cosine(p, b.values()) : sigmoid_mse(p, b.values());
            },
            a.values(), res.grad, opt);
        rep.name = std::string(to_string(sim));
        out.push_back(rep);
    }

    for (auto sim : {Similarity::squared_cosine, Similarity::sigmoid_mse}) {
        for (auto agg : {Aggregation::gram, Aggregation::mean}) {
            ATConfig cfg;
            cfg.layers = {1};
            cfg.similarity = sim;
            cfg.aggregation = agg;
            const Tensor trained = random_tensor({3, 4, 3, 3}, rng, 0.0, 1.0);
            const Tensor pretrained = random_tensor({3, 4, 3, 3}, rng, 0.0, 1.0);
            Tensor analytic = at_loss(trained, pretrained, cfg).grad_trained;
            if (o.flip_at_gradient) analytic *= -1.0;
            auto rep = gradcheck(
                [&](std::span<const double> p) {
                    Tensor probe(trained.shape());
                    std::copy(p.begin(), p.end(), probe.data());
                    return at_loss(probe, pretrained, cfg).value;
                },
                trained.values(), analytic.values(), opt);
            rep.name = "at_loss " + std::string(to_string(agg)) + " " + std::string(to_string(sim));
            out.push_back(rep);
        }
    }
}

/// Full L_TOT of a 2-conv vgg-tiny w.r.t. every parameter.
void network_checks(std::vector<GradcheckReport>& out, Rng& rng, const OracleOptions& o) {
    PresetOptions po;
    po.input_shape = {1, 8, 8};
    po.num_classes = 3;
    po.conv_layers = 2;
    po.hidden_units = 6;
    const ArchConfig arch = vgg_tiny(po);
    const Network extractor = build(arch, o.seed + 100);
    const Tensor x = random_tensor({2, 1, 8, 8}, rng);
    const std::vector<int> labels = {0, 2};

    for (int layer : {1, 2}) {
        for (auto sim : {Similarity::squared_cosine, Similarity::sigmoid_mse}) {
            ATConfig cfg;
            cfg.layers = {layer};
            cfg.similarity = sim;
            const Tensor pre = extract_features(extractor, x, {layer}).at(layer);
            Network net = build(arch, o.seed + static_cast<std::uint64_t>(layer));
            auto& params = net.parameters();
            std::vector<double> point;
            for (const auto& p : params) point.insert(point.end(), p.value.values().begin(), p.value.values().end());

            auto load = [&](std::span<const double> p) {
                std::size_t off = 0;
                for (auto& prm : params) {
                    std::copy_n(p.data() + off, prm.value.size(), prm.value.data());
                    off += prm.value.size();
                }
            };
            auto loss_at = [&](std::span<const double> p, Tape* tape) {
                load(p);
                ForwardOptions fo;
                fo.taps = {layer};
                fo.tape = tape;
                const auto fwd = net.forward(x, fo);
                const double terms[] = {at_loss(fwd.taps.at(layer), pre, cfg).value};
                return total_loss(fwd.output, labels, terms).total;
            };

            load(point);
            net.zero_grad();
            Tape tape;
            ForwardOptions fo;
            fo.taps = {layer};
            fo.tape = &tape;
            const auto fwd = net.forward(x, fo);
            auto term = at_loss(fwd.taps.at(layer), pre, cfg);
            if (o.flip_at_gradient) term.grad_trained *= -1.0;
            const double terms[] = {term.value};
            const auto loss = total_loss(fwd.output, labels, terms);
            net.backward(tape, loss.grad_logits, {{layer, term.grad_trained}});
            std::vector<double> analytic;
            for (const auto& p : params) analytic.insert(analytic.end(), p.grad.values().begin(), p.grad.values().end());

            auto rep = gradcheck([&](std::span<const double> p) { return loss_at(p, nullptr); }, point, analytic,
                                 o.gradcheck, [&](std::span<const double> p) {
                                     Tape t;
                                     loss_at(p, &t);
                                     return t.signature();
                                 });
            load(point);
            rep.name = "L_TOT vgg-tiny/2 AT@" + std::to_string(layer) + " " + std::string(to_string(sim));
            out.push_back(rep);
        }
    }
}

}  // namespace

std::vector<GradcheckReport> run_oracle_suite(const OracleOptions& options) {
    std::vector<GradcheckReport> out;
    Rng rng(options.seed);
    layer_checks(out, rng, options.gradcheck);
    at_piece_checks(out, rng, options);
    network_checks(out, rng, options);
    return out;
}

bool print_report(const std::vector<GradcheckReport>& reports, std::ostream& out) {
    bool all = true;
    for (const auto& r : reports) {
        char line[200];
        std::snprintf(line, sizeof line, "%-4s %-38s max rel err %.3e  (%zu checked, %zu skipped)",
                      r.passed ? "ok" : "FAIL", r.name.c_str(), r.max_rel_error, r.checked, r.skipped);
        out << line << '\n';
        all = all && r.passed;
    }
    out << (all ? "all checks passed" : "gradient check FAILED") << '\n';
    return all;
}

}  // namespace atl::cli
