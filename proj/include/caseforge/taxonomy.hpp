#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace caseforge {

struct TaxonomyNode {
  std::string id;
  std::string name;
  std::vector<std::string> synonyms;
  std::optional<std::string> parent;
  std::vector<std::string> children;  // derived from parent links
};

// Organ/tissue ontology with per-node synonyms. Parent links must form a
// forest; canonical names and synonyms must be unique after folding.
class Taxonomy {
 public:
  static Taxonomy load(const std::filesystem::path& path);
  static Taxonomy from_json(const nlohmann::json& doc);

  const TaxonomyNode* find(const std::string& id) const;
  const TaxonomyNode& require(const std::string& id) const;

  // Exact lookup of a folded name or synonym.
  std::optional<std::string> lookup_name(const std::string& text) const;

  // Parent, children and siblings (nodes sharing the same parent). Roots
  // have no siblings.
  std::vector<std::string> neighbors(const std::string& id) const;

  const std::map<std::string, TaxonomyNode>& nodes() const { return nodes_; }
  size_t size() const { return nodes_.size(); }

 private:
  std::map<std::string, TaxonomyNode> nodes_;
  std::map<std::string, std::string> folded_index_;  // folded name -> node id
};

// Fold, strip articles, then find the longest taxonomy name or synonym
// contained in the text on token boundaries (earliest occurrence breaks
// length ties). Unmatched is a value, not an error.
std::optional<std::string> normalize_answer(const std::string& text, const Taxonomy& taxonomy);

// Step distance on the parent/child/sibling relation graph:
// 0 steps -> 1.0, 1 -> 0.75, 2 -> 0.5, anything further (or unmatched) -> 0.0.
double hierarchical_score(const std::optional<std::string>& pred, const std::string& truth,
                          const Taxonomy& taxonomy);

}  // namespace caseforge
