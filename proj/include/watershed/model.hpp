#ifndef WATERSHED_MODEL_HPP
#define WATERSHED_MODEL_HPP

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "watershed/core.hpp"
#include "watershed/losses.hpp"

namespace watershed {

enum class LossKind { watershed, nca, linear };

std::string_view to_string(LossKind kind);
// Throws UsageError for unknown names.
LossKind parse_loss_kind(std::string_view name);

// f(x) = x^T W with W of shape d_in x d_embed. No bias: every loss here is
// translation invariant in the embedding.
struct LinearEmbedding {
    Matrix weights;

    std::size_t input_dim() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t output_dim() const { return static_cast<std::size_t>(weights.cols()); }

    Matrix embed(const Matrix& x) const;

    static LinearEmbedding identity(std::size_t dim);
};

// Per-feature affine map (x - mean) / scale fitted on training data.
struct Standardizer {
    RowVector mean;
    RowVector scale;

    static Standardizer fit(const Matrix& x);
    static Standardizer identity(std::size_t dim);
    Matrix apply(const Matrix& x) const;
};

/// A trained model: standardisation, linear embedding and, for the linear
/// baseline, a softmax head on top of the embedding.
///
/// On-disk format (text, version 1):
///   # watershed-model 1
///   # key=value            free-form metadata, one per line
///   kind,<watershed|nca|linear>
///   num_classes,<K>
///   [mean]                 one row, d_in values
///   [scale]                one row, d_in values
///   [embedding]            d_in rows of d_embed values
///   [head]                 linear only: d_embed rows of K values
///   [bias]                 linear only: one row of K values
/// Values are written with round-trip precision.
struct Model {
    LossKind kind = LossKind::watershed;
    std::size_t num_classes = 0;
    Standardizer standardizer;
    LinearEmbedding embedding;
    std::optional<LinearHead> head;
    std::vector<std::pair<std::string, std::string>> metadata;

    // Standardise then embed.
    Matrix transform(const Matrix& raw) const;

    static Model identity(std::size_t dim, std::size_t num_classes);
};

void write_model(std::ostream& out, const Model& model);
Model read_model(std::istream& in);
void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace watershed

#endif  // WATERSHED_MODEL_HPP
