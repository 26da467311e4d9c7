#include "recdiff/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace recdiff {

using nlohmann::json;

std::string trim_fold(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

int IngredientVocabulary::find(const std::string& name) const {
    const std::string key = trim_fold(name);
    for (const auto& e : entries)
        if (trim_fold(e.name) == key) return e.id;
    return -1;
}

std::vector<double> Normalization::normalize(const std::vector<double>& raw_grams) const {
    std::vector<double> out(raw_grams.size(), 0.0);
    for (size_t i = 0; i < raw_grams.size(); ++i)
        out[i] = raw_grams[i] / scale[i] - offset[i];
    return out;
}

std::vector<double> Normalization::denormalize(const std::vector<double>& normalized) const {
    std::vector<double> out(normalized.size());
    for (size_t i = 0; i < normalized.size(); ++i)
        out[i] = (normalized[i] + offset[i]) * scale[i];
    return out;
}

std::vector<double> Dataset::normalized_weights(size_t r) const {
    if (normalization.empty())
        throw std::runtime_error("dataset has no normalization; call normalize_weights first");
    return normalization.normalize(recipes[r].weights_grams);
}

std::vector<std::vector<double>> Dataset::cloud() const {
    std::vector<std::vector<double>> out;
    out.reserve(recipes.size());
    for (size_t r = 0; r < recipes.size(); ++r) out.push_back(normalized_weights(r));
    return out;
}

namespace {

struct RawRecipe {
    std::string name;
    std::vector<std::pair<std::string, double>> ingredients;  // (name, grams)
    int line = 0;
};

[[noreturn]] void parse_fail(const std::string& path, int line, const std::string& what) {
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

std::vector<RawRecipe> parse_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<RawRecipe> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_fold(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const std::exception& e) {
            parse_fail(path, lineno, std::string("invalid JSON: ") + e.what());
        }
        RawRecipe r;
        r.line = lineno;
        if (!j.contains("name") || !j["name"].is_string())
            parse_fail(path, lineno, "recipe object needs a string \"name\"");
        r.name = j["name"].get<std::string>();
        if (!j.contains("ingredients") || !j["ingredients"].is_array())
            parse_fail(path, lineno, "recipe object needs an \"ingredients\" array");
        for (const auto& ing : j["ingredients"]) {
            if (!ing.contains("name") || !ing.contains("grams"))
                parse_fail(path, lineno, "ingredient needs \"name\" and \"grams\"");
            r.ingredients.emplace_back(ing["name"].get<std::string>(),
                                       ing["grams"].get<double>());
        }
        out.push_back(std::move(r));
    }
    return out;
}

// CSV: one row per (recipe, ingredient, grams) triple; optional header.
std::vector<RawRecipe> parse_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::vector<RawRecipe> out;
    std::map<std::string, size_t> index;  // recipe name -> position in out
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim_fold(line).empty()) continue;
        std::stringstream ss(line);
        std::string recipe, ingredient, grams_str;
        if (!std::getline(ss, recipe, ',') || !std::getline(ss, ingredient, ',') ||
            !std::getline(ss, grams_str))
            parse_fail(path, lineno, "expected recipe,ingredient,grams");
        if (lineno == 1 && trim_fold(grams_str) == "grams") continue;  // header
        double grams = 0.0;
        try {
            grams = std::stod(grams_str);
        } catch (...) {
            parse_fail(path, lineno, "grams is not a number: " + grams_str);
        }
        auto it = index.find(recipe);
        if (it == index.end()) {
            index.emplace(recipe, out.size());
            out.push_back(RawRecipe{recipe, {}, lineno});
            it = index.find(recipe);
        }
        out[it->second].ingredients.emplace_back(ingredient, grams);
    }
    return out;
}

Dataset build_dataset(const std::string& path, std::vector<RawRecipe> raw,
                      const IngredientVocabulary* fixed_vocab) {
    if (raw.empty()) throw std::runtime_error(path + ": no recipes");

    Dataset ds;
    if (fixed_vocab) ds.vocabulary = *fixed_vocab;

    // first pass: vocabulary in first-appearance order (name as tiebreak is
    // irrelevant for line-oriented input; appearance order is already total)
    if (!fixed_vocab) {
        std::set<std::string> seen;
        for (const auto& r : raw) {
            for (const auto& [name, grams] : r.ingredients) {
                const std::string key = trim_fold(name);
                if (key.empty()) parse_fail(path, r.line, "empty ingredient name");
                if (seen.insert(key).second)
                    ds.vocabulary.entries.push_back(
                        {static_cast<int>(ds.vocabulary.entries.size()), name, std::nullopt});
            }
        }
    }

    const int n = ds.vocabulary.n();
    std::set<std::string> recipe_names;
    for (const auto& r : raw) {
        Recipe rec;
        rec.name = r.name;
        rec.mask.assign(n, 0);
        rec.weights_grams.assign(n, 0.0);
        for (const auto& [name, grams] : r.ingredients) {
            const int id = ds.vocabulary.find(name);
            if (id < 0) parse_fail(path, r.line, "unknown ingredient: " + name);
            if (grams < 0.0)
                parse_fail(path, r.line, "negative weight for " + name);
            if (grams == 0.0) continue;  // zero grams means absent
            rec.mask[id] = 1;
            rec.weights_grams[id] = grams;
        }
        if (!recipe_names.insert(trim_fold(r.name)).second)
            ds.warnings.push_back("duplicate recipe name kept: " + r.name);
        ds.recipes.push_back(std::move(rec));
    }
    return ds;
}

DataFormat infer_format(const std::string& path) {
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : trim_fold(path.substr(dot + 1));
    if (ext == "csv") return DataFormat::csv;
    return DataFormat::jsonl;
}

}  // namespace

Dataset load_dataset(const std::string& path, DataFormat format) {
    if (format == DataFormat::infer) format = infer_format(path);
    auto raw = format == DataFormat::csv ? parse_csv(path) : parse_jsonl(path);
    return build_dataset(path, std::move(raw), nullptr);
}

Dataset load_dataset_with_vocab(const std::string& path, const IngredientVocabulary& vocab,
                                DataFormat format) {
    if (format == DataFormat::infer) format = infer_format(path);
    auto raw = format == DataFormat::csv ? parse_csv(path) : parse_jsonl(path);
    return build_dataset(path, std::move(raw), &vocab);
}

void normalize_weights(Dataset& dataset, NormalizationMode mode) {
    const int n = dataset.n();
    Normalization norm;
    norm.scale.assign(n, 1.0);
    norm.offset.assign(n, 1.0);

    if (mode == NormalizationMode::reference) {
        for (const auto& e : dataset.vocabulary.entries) {
            if (!e.reference_weight)
                throw std::runtime_error("reference normalization: missing reference weight for " +
                                         e.name);
            norm.scale[e.id] = *e.reference_weight;
        }
    } else {
        std::vector<double> sum(n, 0.0);
        std::vector<int> count(n, 0);
        for (const auto& r : dataset.recipes) {
            for (int i = 0; i < n; ++i) {
                if (!r.mask[i]) continue;
                sum[i] += r.weights_grams[i];
                ++count[i];
            }
        }
        for (int i = 0; i < n; ++i)
            if (count[i] > 0) norm.scale[i] = sum[i] / count[i];
    }
    dataset.normalization = std::move(norm);
}

Dataset three_ingredient_fixture() {
    Dataset ds;
    ds.vocabulary.entries = {{0, "bun", 55.0}, {1, "patty", 45.0}, {2, "cheese", 14.0}};
    ds.recipes.push_back({"cheeseburger", {1, 1, 1}, {55.0, 45.0, 14.0}});
    ds.recipes.push_back({"hamburger", {1, 1, 0}, {55.0, 45.0, 0.0}});
    normalize_weights(ds, NormalizationMode::reference);
    return ds;
}

void save_recipes_jsonl(const std::string& path, const Dataset& dataset) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (const auto& r : dataset.recipes) {
        json j;
        j["name"] = r.name;
        j["ingredients"] = json::array();
        for (int i = 0; i < dataset.n(); ++i) {
            if (!r.mask[i]) continue;
            j["ingredients"].push_back(
                {{"name", dataset.vocabulary.entries[i].name}, {"grams", r.weights_grams[i]}});
        }
        out << j.dump() << "\n";
    }
}

}  // namespace recdiff
