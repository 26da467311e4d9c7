#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace recdiff {

struct IngredientEntry {
    int id = 0;
    std::string name;
    std::optional<double> reference_weight;  // grams, > 0 when present
};

// Dense, ordered ingredient registry. Ids are 0..n-1 in first-appearance
// order; names are unique after case-folding and trimming.
struct IngredientVocabulary {
    std::vector<IngredientEntry> entries;

    int n() const { return static_cast<int>(entries.size()); }
    int find(const std::string& name) const;  // -1 when absent (folded match)
};

struct Recipe {
    std::string name;
    std::vector<uint8_t> mask;           // length n, 0/1
    std::vector<double> weights_grams;   // length n, >0 exactly where mask=1
};

enum class NormalizationMode { reference, per_ingredient_stats };

// normalized[i] = raw[i]/scale[i] - offset[i], applied to every coordinate
// (raw 0 g lands at -offset, e.g. the paper's hamburger cheese at -1).
struct Normalization {
    std::vector<double> scale;
    std::vector<double> offset;

    bool empty() const { return scale.empty(); }
    std::vector<double> normalize(const std::vector<double>& raw_grams) const;
    std::vector<double> denormalize(const std::vector<double>& normalized) const;
};

struct Dataset {
    IngredientVocabulary vocabulary;
    std::vector<Recipe> recipes;
    Normalization normalization;
    std::vector<std::string> warnings;

    int n() const { return vocabulary.n(); }
    // normalized weights of recipe r (absent coordinates at sentinel 0)
    std::vector<double> normalized_weights(size_t r) const;
    // all recipes as normalized weight vectors (the training cloud)
    std::vector<std::vector<double>> cloud() const;
};

enum class DataFormat { jsonl, csv, infer };

Dataset load_dataset(const std::string& path, DataFormat format = DataFormat::infer);

// Same parse, but recipes are mapped onto an existing vocabulary (unknown
// ingredient names are a hard error). Used to compare generated samples
// against a training vocabulary.
Dataset load_dataset_with_vocab(const std::string& path, const IngredientVocabulary& vocab,
                                DataFormat format = DataFormat::infer);

void normalize_weights(Dataset& dataset, NormalizationMode mode);

// The paper's two-burger benchmark: bun 55 g, patty 45 g, cheese 14 g
// reference weights; cheeseburger [1,1,1] and hamburger [1,1,0].
Dataset three_ingredient_fixture();

void save_recipes_jsonl(const std::string& path, const Dataset& dataset);

std::string trim_fold(const std::string& s);

}  // namespace recdiff
