#pragma once

#include "atl/tensor.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace atl {

enum class Similarity { squared_cosine, sigmoid_mse };
enum class Aggregation { gram, mean, sum, max, comp_mul };
/// `penalize` is anti-transfer; `encourage` flips the sign of the term
/// (the inverse-beta ablation).
enum class Direction { penalize, encourage };

std::string_view to_string(Similarity s);
std::string_view to_string(Aggregation a);
std::string_view to_string(Direction d);
Similarity similarity_from_string(std::string_view name);
Aggregation aggregation_from_string(std::string_view name);
Direction direction_from_string(std::string_view name);

/// Which conv layers carry the anti-transfer term and how it is computed.
struct ATConfig {
    std::vector<int> layers;
    double beta = 1.0;
    Similarity similarity = Similarity::squared_cosine;
    Aggregation aggregation = Aggregation::gram;
    Direction direction = Direction::penalize;

    /// Throws ConfigError on negative/non-finite beta, duplicate or
    /// non-positive layer indices, or (when `active`) an empty layer set.
    void validate(bool active = true) const;

    friend bool operator==(const ATConfig&, const ATConfig&) = default;
};

/// Norms below this make a similarity degenerate; it is then defined as 0.
inline constexpr double kDegenerateNorm = 1e-12;
/// Exponent applied to every activation by the compressed-multiplication
/// aggregation before the channel product.
inline constexpr double kCompMulExponent = 0.001;

/// Per-sample channel Gram matrices: [B,C,H,W] -> [B,C,C] with
/// G[b,i,j] = <F[b,i,:,:], F[b,j,:,:]>.
Tensor gram(const Tensor& feature);
/// dL/dF given dL/dG for the same feature map.
Tensor gram_backward(const Tensor& feature, const Tensor& grad_gram);

/// Pixelwise reduction along the channel axis: [B,C,H,W] -> [B,H,W].
/// `Aggregation::gram` is rejected here; use gram().
Tensor aggregate(const Tensor& feature, Aggregation kind);
Tensor aggregate_backward(const Tensor& feature, Aggregation kind, const Tensor& grad);

/// Similarity value and its gradient with respect to the first argument.
struct SimilarityResult {
    double value = 0.0;
    std::vector<double> grad;
};

/// (a.b / (|a||b|))^2, or 0 when either norm is below kDegenerateNorm.
double squared_cosine(std::span<const double> a, std::span<const double> b);
SimilarityResult squared_cosine_with_grad(std::span<const double> a, std::span<const double> b);

/// sigmoid(-MSE(a, b)); 0.5 at a == b and decreasing with the distance.
double sigmoid_mse(std::span<const double> a, std::span<const double> b);
SimilarityResult sigmoid_mse_with_grad(std::span<const double> a, std::span<const double> b);

struct ATLayerLoss {
    /// Batch mean of the signed, beta-scaled similarity.
    double value = 0.0;
    /// Unscaled batch-mean similarity, for logging.
    double similarity = 0.0;
    /// dvalue/dtrained; the pre-trained map is a constant.
    Tensor grad_trained;
};

/// gram() or aggregate(), whichever `kind` selects.
Tensor aggregate_any(const Tensor& feature, Aggregation kind);

/// Anti-transfer term for one tapped layer. Both maps are [B,C,H,W] with
/// identical extents.
ATLayerLoss at_loss(const Tensor& trained, const Tensor& pretrained, const ATConfig& config);

/// Same term with the pre-trained side already aggregated (a frozen
/// extractor's Gram matrices can be computed once per sample).
ATLayerLoss at_loss_precomputed(const Tensor& trained, const Tensor& pretrained_aggregate, const ATConfig& config);

struct CrossEntropy {
    double loss = 0.0;  // batch mean
    Tensor grad_logits;
    std::int64_t correct = 0;
};

/// Softmax cross-entropy on [B,n] logits with integer labels in [0,n).
CrossEntropy softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

struct TotalLoss {
    double total = 0.0;
    double cross_entropy = 0.0;
    double at_sum = 0.0;
    Tensor grad_logits;
    std::int64_t correct = 0;
};

/// Cross-entropy plus the sum of the per-layer anti-transfer terms.
TotalLoss total_loss(const Tensor& logits, std::span<const int> labels, std::span<const double> at_terms);

}  // namespace atl
