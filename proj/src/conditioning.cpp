#include "mqc/conditioning.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

#include "mqc/rng.hpp"

namespace mqc {

using nlohmann::json;

namespace {

constexpr const char* kPlaceholder = "[CLS]";

void l2_normalize(std::vector<float>& v) {
    double norm2 = 0.0;
    for (const float x : v) norm2 += static_cast<double>(x) * x;
    if (norm2 <= 0.0) throw ValueError("cannot normalize a zero embedding vector");
    const double inv = 1.0 / std::sqrt(norm2);
    for (float& x : v) x = static_cast<float>(x * inv);
}

} // namespace

const char* to_string(EmbeddingProvider p) {
    switch (p) {
        case EmbeddingProvider::one_hot: return "one_hot";
        case EmbeddingProvider::precomputed_file: return "precomputed_file";
        case EmbeddingProvider::hash_fallback: return "hash_fallback";
    }
    throw ValueError("unknown embedding provider");
}

EmbeddingProvider embedding_provider_from_string(const std::string& s) {
    if (s == "one_hot") return EmbeddingProvider::one_hot;
    if (s == "precomputed_file") return EmbeddingProvider::precomputed_file;
    if (s == "hash_fallback") return EmbeddingProvider::hash_fallback;
    throw ValueError("unknown embedding provider: " + s);
}

const ConditionEmbedding& EmbeddingTable::lookup(int class_id) const {
    if (class_id < 1 || class_id > static_cast<int>(embeddings.size()))
        throw ValueError("class_id not covered by embedding table: " + std::to_string(class_id));
    return embeddings[class_id - 1];
}

void EmbeddingTable::validate() const {
    vocabulary.validate();
    if (static_cast<int>(embeddings.size()) != vocabulary.size())
        throw ValueError("embedding table does not cover the vocabulary");
    for (const auto& e : embeddings) {
        if (static_cast<int>(e.vector.size()) != d_t)
            throw ValueError("inconsistent embedding dimension in table");
        for (const float v : e.vector)
            if (!std::isfinite(v)) throw ValueError("non-finite embedding entry");
    }
}

std::string render_prompt(const std::string& prompt_template, const std::string& class_name) {
    const auto first = prompt_template.find(kPlaceholder);
    if (first == std::string::npos)
        throw ValueError("prompt template has no [CLS] placeholder");
    if (prompt_template.find(kPlaceholder, first + 1) != std::string::npos)
        throw ValueError("prompt template has more than one [CLS] placeholder");
    std::string out = prompt_template;
    out.replace(first, std::strlen(kPlaceholder), class_name);
    return out;
}

EmbeddingTable embed_classes(const ClassVocabulary& vocab, EmbeddingProvider provider,
                             const EmbedOptions& options) {
    vocab.validate();
    EmbeddingTable table;
    table.vocabulary = vocab;
    table.provider = to_string(provider);
    table.prompt_template = options.prompt_template;

    switch (provider) {
        case EmbeddingProvider::one_hot: {
            table.d_t = vocab.size();
            for (const auto& e : vocab.entries) {
                ConditionEmbedding emb;
                emb.class_id = e.id;
                emb.provider = table.provider;
                emb.prompt_template = options.prompt_template;
                emb.vector.assign(table.d_t, 0.0f);
                emb.vector[e.id - 1] = 1.0f;
                table.embeddings.push_back(std::move(emb));
            }
            break;
        }
        case EmbeddingProvider::hash_fallback: {
            if (options.hash_dim < 1) throw ValueError("hash_dim must be positive");
            table.d_t = options.hash_dim;
            for (const auto& e : vocab.entries) {
                const std::string prompt = render_prompt(options.prompt_template, e.name);
                Rng rng(derive_seed(options.seed, prompt));
                ConditionEmbedding emb;
                emb.class_id = e.id;
                emb.provider = table.provider;
                emb.prompt_template = options.prompt_template;
                emb.vector.resize(table.d_t);
                for (float& v : emb.vector) v = static_cast<float>(rng.normal());
                l2_normalize(emb.vector);
                table.embeddings.push_back(std::move(emb));
            }
            break;
        }
        case EmbeddingProvider::precomputed_file: {
            std::ifstream in(options.table_file, std::ios::binary);
            if (!in) throw IoError("cannot open embedding file: " + options.table_file);
            json j;
            try {
                in >> j;
            } catch (const json::exception& e) {
                throw FormatError("corrupt embedding file: " + std::string(e.what()));
            }
            const auto& prompts = j.at("prompts");
            table.d_t = j.at("d_t").get<int>();
            for (const auto& e : vocab.entries) {
                const std::string prompt = render_prompt(options.prompt_template, e.name);
                if (!prompts.contains(prompt))
                    throw ValueError("embedding file has no entry for prompt: " + prompt);
                ConditionEmbedding emb;
                emb.class_id = e.id;
                emb.provider = table.provider;
                emb.prompt_template = options.prompt_template;
                emb.vector = prompts.at(prompt).get<std::vector<float>>();
                if (static_cast<int>(emb.vector.size()) != table.d_t)
                    throw ValueError("embedding dimension mismatch for prompt: " + prompt);
                l2_normalize(emb.vector);
                table.embeddings.push_back(std::move(emb));
            }
            break;
        }
    }
    table.validate();
    return table;
}

std::vector<double> cosine_similarity_matrix(const std::vector<std::vector<float>>& vectors) {
    const std::size_t n = vectors.size();
    if (n < 2) throw ValueError("cosine similarity matrix needs at least two vectors");
    std::vector<double> norms(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (const float v : vectors[i]) {
            if (!std::isfinite(v)) throw ValueError("non-finite vector entry");
            s += static_cast<double>(v) * v;
        }
        if (s <= 0.0) throw ValueError("zero-norm vector in similarity matrix");
        norms[i] = std::sqrt(s);
        if (vectors[i].size() != vectors[0].size())
            throw ShapeError("similarity matrix vectors differ in dimension");
    }
    std::vector<double> h(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        h[i * n + i] = 1.0;
        for (std::size_t j = i + 1; j < n; ++j) {
            double dot = 0.0;
            for (std::size_t k = 0; k < vectors[i].size(); ++k)
                dot += static_cast<double>(vectors[i][k]) * vectors[j][k];
            const double c = dot / (norms[i] * norms[j]);
            h[i * n + j] = c;
            h[j * n + i] = c;
        }
    }
    return h;
}

void save_embedding_table(const EmbeddingTable& table, const std::string& path) {
    table.validate();
    json classes = json::array();
    for (std::size_t i = 0; i < table.embeddings.size(); ++i) {
        const auto& e = table.embeddings[i];
        classes.push_back(json{{"id", e.class_id},
                               {"name", table.vocabulary.entries[i].name},
                               {"vector", e.vector}});
    }
    const json j{{"format", "mqc-embeddings"},
                 {"version", 1},
                 {"d_t", table.d_t},
                 {"provider", table.provider},
                 {"template", table.prompt_template},
                 {"count", table.embeddings.size()},
                 {"classes", classes}};
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write embedding table: " + path);
    out << j.dump(1) << "\n";
}

EmbeddingTable load_embedding_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open embedding table: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError("corrupt embedding table " + path + ": " + e.what());
    }
    if (j.value("format", "") != "mqc-embeddings")
        throw FormatError("not an embedding table: " + path);
    EmbeddingTable table;
    table.d_t = j.at("d_t").get<int>();
    table.provider = j.at("provider").get<std::string>();
    table.prompt_template = j.at("template").get<std::string>();
    for (const auto& c : j.at("classes")) {
        table.vocabulary.entries.push_back(
            {c.at("id").get<int>(), c.at("name").get<std::string>()});
        ConditionEmbedding emb;
        emb.class_id = c.at("id").get<int>();
        emb.provider = table.provider;
        emb.prompt_template = table.prompt_template;
        emb.vector = c.at("vector").get<std::vector<float>>();
        table.embeddings.push_back(std::move(emb));
    }
    if (j.at("count").get<std::size_t>() != table.embeddings.size())
        throw FormatError("embedding table count mismatch: " + path);
    table.validate();
    return table;
}

} // namespace mqc
