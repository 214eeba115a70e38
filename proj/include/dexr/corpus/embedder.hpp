#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "dexr/corpus/text.hpp"
#include "dexr/corpus/vocabulary.hpp"
#include "dexr/error.hpp"
#include "dexr/numerics/tensor.hpp"
#include "dexr/random.hpp"

namespace dexr {

/// Sentence embedding as the L2-normalised mean of word vectors. Unknown
/// tokens contribute the unk row. Any type with the same `embed` signature
/// can be plugged into the profile builder.
class mean_vector_embedder {
public:
    mean_vector_embedder(const vocabulary& vocab, tensor word_vectors)
        : vocab_(&vocab), table_(std::move(word_vectors)) {
        if (table_.rank() != 2 || table_.rows() < vocab.size())
            throw shape_error("mean_vector_embedder: table " + shape_string(table_.shape()) +
                              " does not cover vocabulary of size " + std::to_string(vocab.size()));
    }

    /// Seeded N(0, 1) table, for use before any model exists.
    static mean_vector_embedder random(const vocabulary& vocab, std::size_t dim, std::uint64_t seed) {
        rng_type rng(seed);
        std::normal_distribution<double> n(0.0, 1.0);
        auto table = tensor::matrix(vocab.size(), dim);
        for (auto& v : table.values()) v = n(rng);
        return mean_vector_embedder(vocab, std::move(table));
    }

    std::size_t dim() const noexcept { return table_.cols(); }

    std::vector<double> embed(const token_list& tokens) const {
        return embed_ids(vocab_->encode(tokens));
    }

    std::vector<double> embed_ids(std::span<const int> ids) const {
        if (ids.empty()) throw validation_error("sentence_embed: empty sentence");
        std::vector<double> v(dim(), 0.0);
        for (int id : ids) {
            auto row = table_.row(static_cast<std::size_t>(id));
            for (std::size_t j = 0; j < v.size(); ++j) v[j] += row[j];
        }
        double norm = 0.0;
        for (double& x : v) {
            x /= static_cast<double>(ids.size());
            norm += x * x;
        }
        norm = std::sqrt(norm);
        if (norm > 0.0)
            for (double& x : v) x /= norm;
        return v;
    }

private:
    const vocabulary* vocab_;
    tensor table_;
};

inline double cosine_of_unit(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

}  // namespace dexr
