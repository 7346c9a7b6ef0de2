#include "atl/at_loss.hpp"

#include "atl/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

namespace atl {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

void require_feature(const Tensor& f, const char* what) {
    if (f.rank() != 4) throw ShapeError(std::string(what) + " must be [B,C,H,W], got " + to_string(f.shape()));
    if (f.dim(1) < 1) throw ShapeError(std::string(what) + " has no channels");
    if (f.dim(2) * f.dim(3) < 1) throw ShapeError(std::string(what) + " has an empty spatial extent");
}

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

void require_same_length(std::span<const double> a, std::span<const double> b, const char* what) {
    if (a.size() != b.size()) {
        throw ShapeError(std::string(what) + ": length " + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()));
    }
}

double logistic(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

std::string_view to_string(Similarity s) {
    return s == Similarity::squared_cosine ? "squared_cosine" : "sigmoid_mse";
}

std::string_view to_string(Aggregation a) {
    switch (a) {
        case Aggregation::gram: return "gram";
        case Aggregation::mean: return "mean";
        case Aggregation::sum: return "sum";
        case Aggregation::max: return "max";
        case Aggregation::comp_mul: return "comp_mul";
    }
    return "gram";
}

std::string_view to_string(Direction d) {
    return d == Direction::penalize ? "penalize" : "encourage";
}

Similarity similarity_from_string(std::string_view name) {
    if (name == "squared_cosine") return Similarity::squared_cosine;
    if (name == "sigmoid_mse") return Similarity::sigmoid_mse;
    throw ConfigError("unknown similarity '" + std::string(name) + "' (squared_cosine, sigmoid_mse)");
}

Aggregation aggregation_from_string(std::string_view name) {
    for (auto a : {Aggregation::gram, Aggregation::mean, Aggregation::sum, Aggregation::max, Aggregation::comp_mul}) {
        if (to_string(a) == name) return a;
    }
    throw ConfigError("unknown aggregation '" + std::string(name) + "' (gram, mean, sum, max, comp_mul)");
}

Direction direction_from_string(std::string_view name) {
    if (name == "penalize") return Direction::penalize;
    if (name == "encourage") return Direction::encourage;
    throw ConfigError("unknown direction '" + std::string(name) + "' (penalize, encourage)");
}

void ATConfig::validate(bool active) const {
    if (!std::isfinite(beta) || beta < 0.0) {
        throw ConfigError("AT beta must be finite and >= 0 (use direction=encourage for the inverse ablation)");
    }
    if (active && layers.empty()) throw ConfigError("AT needs at least one layer");
    std::set<int> seen;
    for (int l : layers) {
        if (l < 1) throw ConfigError("AT layer indices are 1-based conv indices, got " + std::to_string(l));
        if (!seen.insert(l).second) throw ConfigError("AT layer " + std::to_string(l) + " listed twice");
    }
}

Tensor gram(const Tensor& feature) {
    require_feature(feature, "gram input");
    const auto b = feature.dim(0), c = feature.dim(1), p = feature.dim(2) * feature.dim(3);
    Tensor g({b, c, c});
    for (std::int64_t n = 0; n < b; ++n) {
        ConstMap f(feature.data() + n * c * p, c, p);
        Map(g.data() + n * c * c, c, c).noalias() = f * f.transpose();
    }
    return g;
}

Tensor gram_backward(const Tensor& feature, const Tensor& grad_gram) {
    require_feature(feature, "gram input");
    const auto b = feature.dim(0), c = feature.dim(1), p = feature.dim(2) * feature.dim(3);
    if (grad_gram.shape() != Shape{b, c, c}) throw ShapeError("gram backward: gradient shape mismatch");
    Tensor df(feature.shape());
    for (std::int64_t n = 0; n < b; ++n) {
        ConstMap f(feature.data() + n * c * p, c, p);
        ConstMap dg(grad_gram.data() + n * c * c, c, c);
        Map(df.data() + n * c * p, c, p).noalias() = (dg + dg.transpose()) * f;
    }
    return df;
}

Tensor aggregate(const Tensor& feature, Aggregation kind) {
    if (kind == Aggregation::gram) throw ConfigError("aggregate(): use gram() for Gram aggregation");
    require_feature(feature, "aggregate input");
    const auto b = feature.dim(0), c = feature.dim(1), h = feature.dim(2), w = feature.dim(3), p = h * w;
    Tensor out({b, h, w});
    for (std::int64_t n = 0; n < b; ++n) {
        const double* f = feature.data() + n * c * p;
        double* o = out.data() + n * p;
        for (std::int64_t i = 0; i < p; ++i) {
            double acc = kind == Aggregation::comp_mul ? 1.0 : (kind == Aggregation::max ? f[i] : 0.0);
            for (std::int64_t ch = 0; ch < c; ++ch) {
                const double v = f[ch * p + i];
                switch (kind) {
                    case Aggregation::mean:
                    case Aggregation::sum: acc += v; break;
                    case Aggregation::max: acc = std::max(acc, v); break;
                    case Aggregation::comp_mul:
                        if (v < 0.0) throw NumericError("comp_mul aggregation requires nonnegative activations");
                        acc *= std::pow(v, kCompMulExponent);
                        break;
                    case Aggregation::gram: break;
                }
            }
            o[i] = kind == Aggregation::mean ? acc / static_cast<double>(c) : acc;
        }
    }
    return out;
}

Tensor aggregate_backward(const Tensor& feature, Aggregation kind, const Tensor& grad) {
    if (kind == Aggregation::gram) return gram_backward(feature, grad);
    require_feature(feature, "aggregate input");
    const auto b = feature.dim(0), c = feature.dim(1), h = feature.dim(2), w = feature.dim(3), p = h * w;
    if (grad.shape() != Shape{b, h, w}) throw ShapeError("aggregate backward: gradient shape mismatch");
    const Tensor value = kind == Aggregation::comp_mul ? aggregate(feature, kind) : Tensor();
    Tensor df(feature.shape());
    for (std::int64_t n = 0; n < b; ++n) {
        const double* f = feature.data() + n * c * p;
        double* d = df.data() + n * c * p;
        for (std::int64_t i = 0; i < p; ++i) {
            const double g = grad[static_cast<std::size_t>(n * p + i)];
            switch (kind) {
                case Aggregation::sum:
                    for (std::int64_t ch = 0; ch < c; ++ch) d[ch * p + i] = g;
                    break;
                case Aggregation::mean:
                    for (std::int64_t ch = 0; ch < c; ++ch) d[ch * p + i] = g / static_cast<double>(c);
                    break;
                case Aggregation::max: {
                    std::int64_t arg = 0;
                    for (std::int64_t ch = 1; ch < c; ++ch) {
                        if (f[ch * p + i] > f[arg * p + i]) arg = ch;
                    }
                    d[arg * p + i] = g;
                    break;
                }
                case Aggregation::comp_mul: {
                    // d/dv prod_c v_c^e = e * prod / v; zero activations get a zero subgradient.
                    const double prod = value[static_cast<std::size_t>(n * p + i)];
                    for (std::int64_t ch = 0; ch < c; ++ch) {
                        const double v = f[ch * p + i];
                        d[ch * p + i] = v > 0.0 ? g * kCompMulExponent * prod / v : 0.0;
                    }
                    break;
                }
                case Aggregation::gram: break;
            }
        }
    }
    return df;
}

double squared_cosine(std::span<const double> a, std::span<const double> b) {
    return squared_cosine_with_grad(a, b).value;
}

SimilarityResult squared_cosine_with_grad(std::span<const double> a, std::span<const double> b) {
    require_same_length(a, b, "squared_cosine");
    SimilarityResult r;
    r.grad.assign(a.size(), 0.0);
    const double na = std::sqrt(dot(a, a));
    const double nb = std::sqrt(dot(b, b));
    if (na < kDegenerateNorm || nb < kDegenerateNorm) return r;
    const double ab = dot(a, b);
    const double cos = ab / (na * nb);
    r.value = cos * cos;
    // d(cos^2)/da = 2 cos / (|a||b|) * (b - (a.b / |a|^2) a)
    const double scale = 2.0 * cos / (na * nb);
    const double proj = ab / (na * na);
    for (std::size_t i = 0; i < a.size(); ++i) r.grad[i] = scale * (b[i] - proj * a[i]);
    return r;
}

double sigmoid_mse(std::span<const double> a, std::span<const double> b) {
    return sigmoid_mse_with_grad(a, b).value;
}

SimilarityResult sigmoid_mse_with_grad(std::span<const double> a, std::span<const double> b) {
    require_same_length(a, b, "sigmoid_mse");
    if (a.empty()) throw ShapeError("sigmoid_mse: empty input");
    SimilarityResult r;
    const double n = static_cast<double>(a.size());
    double mse = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) mse += (a[i] - b[i]) * (a[i] - b[i]);
    mse /= n;
    r.value = logistic(-mse);
    const double scale = -r.value * (1.0 - r.value) * 2.0 / n;
    r.grad.resize(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r.grad[i] = scale * (a[i] - b[i]);
    return r;
}

Tensor aggregate_any(const Tensor& feature, Aggregation kind) {
    return kind == Aggregation::gram ? gram(feature) : aggregate(feature, kind);
}

ATLayerLoss at_loss(const Tensor& trained, const Tensor& pretrained, const ATConfig& config) {
    require_feature(trained, "trained feature map");
    if (trained.shape() != pretrained.shape()) {
        throw ShapeError("AT feature maps differ: trained " + to_string(trained.shape()) + " vs pre-trained " +
                         to_string(pretrained.shape()) + " (incompatible architectures)");
    }
    return at_loss_precomputed(trained, aggregate_any(pretrained, config.aggregation), config);
}

ATLayerLoss at_loss_precomputed(const Tensor& trained, const Tensor& pretrained_aggregate, const ATConfig& config) {
    require_feature(trained, "trained feature map");
    const Tensor agg_t = aggregate_any(trained, config.aggregation);
    const Tensor& agg_p = pretrained_aggregate;
    if (agg_t.shape() != agg_p.shape()) {
        throw ShapeError("AT representations differ: trained " + to_string(agg_t.shape()) + " vs pre-trained " +
                         to_string(agg_p.shape()) + " (incompatible architectures)");
    }

    const auto batch = trained.dim(0);
    const auto stride = agg_t.size() / static_cast<std::size_t>(batch);
    const double sign = config.direction == Direction::penalize ? 1.0 : -1.0;
    const double weight = sign * config.beta / static_cast<double>(batch);

    ATLayerLoss out;
    Tensor grad_agg(agg_t.shape());
    double sim_sum = 0.0;
    for (std::int64_t n = 0; n < batch; ++n) {
        const auto offset = static_cast<std::size_t>(n) * stride;
        std::span<const double> a(agg_t.data() + offset, stride);
        std::span<const double> b(agg_p.data() + offset, stride);
        const auto s = config.similarity == Similarity::squared_cosine ? squared_cosine_with_grad(a, b)
                                                                       : sigmoid_mse_with_grad(a, b);
        sim_sum += s.value;
        for (std::size_t i = 0; i < stride; ++i) grad_agg[offset + i] = weight * s.grad[i];
    }
    out.similarity = sim_sum / static_cast<double>(batch);
    out.value = sign * config.beta * out.similarity;
    out.grad_trained = aggregate_backward(trained, config.aggregation, grad_agg);
    return out;
}

CrossEntropy softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
    if (logits.rank() != 2) throw ShapeError("cross-entropy expects [B,n] logits, got " + to_string(logits.shape()));
    const auto batch = logits.dim(0), n = logits.dim(1);
    if (static_cast<std::int64_t>(labels.size()) != batch) {
        throw ShapeError("cross-entropy: " + std::to_string(labels.size()) + " labels for batch of " +
                         std::to_string(batch));
    }
    CrossEntropy ce;
    ce.grad_logits = Tensor(logits.shape());
    for (std::int64_t r = 0; r < batch; ++r) {
        const int label = labels[static_cast<std::size_t>(r)];
        if (label < 0 || label >= n) {
            throw ConfigError("label " + std::to_string(label) + " out of range for " + std::to_string(n) + " classes");
        }
        const double* z = logits.data() + r * n;
        double* g = ce.grad_logits.data() + r * n;
        std::int64_t arg = 0;
        double m = z[0];
        for (std::int64_t i = 1; i < n; ++i) {
            if (z[i] > m) {
                m = z[i];
                arg = i;
            }
        }
        double sum = 0.0;
        for (std::int64_t i = 0; i < n; ++i) sum += std::exp(z[i] - m);
        const double log_z = m + std::log(sum);
        ce.loss += log_z - z[label];
        for (std::int64_t i = 0; i < n; ++i) {
            g[i] = (std::exp(z[i] - log_z) - (i == label ? 1.0 : 0.0)) / static_cast<double>(batch);
        }
        if (arg == label) ++ce.correct;
    }
    ce.loss /= static_cast<double>(batch);
    return ce;
}

TotalLoss total_loss(const Tensor& logits, std::span<const int> labels, std::span<const double> at_terms) {
    auto ce = softmax_cross_entropy(logits, labels);
    TotalLoss t;
    t.cross_entropy = ce.loss;
    for (double term : at_terms) t.at_sum += term;
    t.total = t.cross_entropy + t.at_sum;
    t.grad_logits = std::move(ce.grad_logits);
    t.correct = ce.correct;
    if (!std::isfinite(t.total)) throw NumericError("non-finite total loss");
    return t;
}

}  // namespace atl
