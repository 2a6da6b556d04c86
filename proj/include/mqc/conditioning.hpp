#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mqc/vocab.hpp"

namespace mqc {

// Per-class condition vector. Unit L2 norm after provider post-processing, so
// cosine similarity reduces to a dot product.
struct ConditionEmbedding {
    int class_id = 0;
    std::vector<float> vector;
    std::string provider;
    std::string prompt_template;
};

enum class EmbeddingProvider { one_hot, precomputed_file, hash_fallback };

const char* to_string(EmbeddingProvider p);
EmbeddingProvider embedding_provider_from_string(const std::string& s);

struct EmbeddingTable {
    ClassVocabulary vocabulary;
    int d_t = 0;
    std::string provider;
    std::string prompt_template;
    std::vector<ConditionEmbedding> embeddings; // one per class, vocabulary order

    const ConditionEmbedding& lookup(int class_id) const;
    void validate() const;
};

// Substitute the class name for the single "[CLS]" placeholder.
std::string render_prompt(const std::string& prompt_template, const std::string& class_name);

struct EmbedOptions {
    std::string prompt_template = "[CLS]";
    std::string table_file;    // precomputed_file provider
    int hash_dim = 32;         // hash_fallback provider
    std::uint64_t seed = 0;    // hash_fallback provider
};

// one_hot: standard basis, d_t = |vocab|. precomputed_file: vectors looked up
// by rendered prompt, then normalized. hash_fallback: deterministic unit
// vector seeded from the rendered prompt; an offline stand-in for a real text
// encoder.
EmbeddingTable embed_classes(const ClassVocabulary& vocab, EmbeddingProvider provider,
                             const EmbedOptions& options);

// H[i][j] = cosine of the angle between vectors i and j (row-major n*n).
std::vector<double> cosine_similarity_matrix(const std::vector<std::vector<float>>& vectors);

void save_embedding_table(const EmbeddingTable& table, const std::string& path);
EmbeddingTable load_embedding_table(const std::string& path);

} // namespace mqc
