#include "caseforge/taxonomy.hpp"

#include <set>

#include "caseforge/errors.hpp"
#include "caseforge/jsonl.hpp"
#include "caseforge/strings.hpp"

namespace caseforge {

using nlohmann::json;

Taxonomy Taxonomy::load(const std::filesystem::path& path) {
  return from_json(jsonl::read_json_file(path));
}

Taxonomy Taxonomy::from_json(const json& doc) {
  const json* array = &doc;
  if (doc.is_object() && doc.contains("nodes")) array = &doc.at("nodes");
  if (!array->is_array()) fail("parse", "taxonomy must be a JSON array of nodes");

  Taxonomy taxonomy;
  for (const json& entry : *array) {
    TaxonomyNode node;
    node.id = entry.at("id").get<std::string>();
    node.name = entry.at("name").get<std::string>();
    const json synonyms_json = entry.value("synonyms", json::array());
    for (const json& synonym : synonyms_json) {
      node.synonyms.push_back(synonym.get<std::string>());
    }
    if (entry.contains("parent") && !entry.at("parent").is_null()) {
      node.parent = entry.at("parent").get<std::string>();
    }
    if (!taxonomy.nodes_.emplace(node.id, node).second) {
      fail("duplicate_name", "duplicate taxonomy node id '" + node.id + "'");
    }
  }

  for (auto& [id, node] : taxonomy.nodes_) {
    if (!node.parent) continue;
    auto parent_it = taxonomy.nodes_.find(*node.parent);
    if (parent_it == taxonomy.nodes_.end()) {
      fail("parse", "node '" + id + "' names unknown parent '" + *node.parent + "'");
    }
    parent_it->second.children.push_back(id);
  }

  // Parent links must not loop back.
  for (const auto& [id, node] : taxonomy.nodes_) {
    std::set<std::string> visited{id};
    const TaxonomyNode* current = &node;
    while (current->parent) {
      if (!visited.insert(*current->parent).second) {
        fail("taxonomy_cycle", "parent chain of '" + id + "' contains a cycle");
      }
      current = &taxonomy.nodes_.at(*current->parent);
    }
  }

  for (const auto& [id, node] : taxonomy.nodes_) {
    auto add_name = [&](const std::string& name) {
      const std::string folded =
          strings::join(strings::fold_tokens(name, /*strip_articles=*/true), " ");
      if (folded.empty()) fail("parse", "node '" + id + "' has a name that folds to nothing");
      auto [it, inserted] = taxonomy.folded_index_.emplace(folded, id);
      if (!inserted && it->second != id) {
        fail("duplicate_name", "'" + name + "' resolves to both '" + it->second + "' and '" +
                                   id + "' after folding");
      }
    };
    add_name(node.name);
    for (const std::string& synonym : node.synonyms) add_name(synonym);
  }
  return taxonomy;
}

const TaxonomyNode* Taxonomy::find(const std::string& id) const {
  auto it = nodes_.find(id);
  return it == nodes_.end() ? nullptr : &it->second;
}

const TaxonomyNode& Taxonomy::require(const std::string& id) const {
  const TaxonomyNode* node = find(id);
  if (!node) fail("taxonomy", "unknown taxonomy node '" + id + "'");
  return *node;
}

std::optional<std::string> Taxonomy::lookup_name(const std::string& text) const {
  const std::string folded = strings::join(strings::fold_tokens(text, true), " ");
  auto it = folded_index_.find(folded);
  if (it == folded_index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> Taxonomy::neighbors(const std::string& id) const {
  const TaxonomyNode& node = require(id);
  std::vector<std::string> out;
  if (node.parent) {
    out.push_back(*node.parent);
    for (const std::string& sibling : nodes_.at(*node.parent).children) {
      if (sibling != id) out.push_back(sibling);
    }
  }
  for (const std::string& child : node.children) out.push_back(child);
  return out;
}

std::optional<std::string> normalize_answer(const std::string& text, const Taxonomy& taxonomy) {
  const std::vector<std::string> words = strings::fold_tokens(text, true);
  if (words.empty()) return std::nullopt;

  struct Match {
    size_t length = 0;  // folded characters, longer wins
    size_t position = 0;
    std::string id;
  };
  std::optional<Match> best;

  for (const auto& [id, node] : taxonomy.nodes()) {
    std::vector<std::string> names{node.name};
    names.insert(names.end(), node.synonyms.begin(), node.synonyms.end());
    for (const std::string& name : names) {
      const std::vector<std::string> target = strings::fold_tokens(name, true);
      if (target.empty() || target.size() > words.size()) continue;
      for (size_t start = 0; start + target.size() <= words.size(); ++start) {
        bool hit = true;
        for (size_t k = 0; k < target.size(); ++k) {
          if (words[start + k] != target[k]) {
            hit = false;
            break;
          }
        }
        if (!hit) continue;
        size_t length = target.size() - 1;  // spaces between tokens
        for (const std::string& token : target) length += token.size();
        if (!best || length > best->length ||
            (length == best->length && start < best->position)) {
          best = Match{length, start, id};
        }
        break;  // earliest occurrence of this name is enough
      }
    }
  }
  if (!best) return std::nullopt;
  return best->id;
}

double hierarchical_score(const std::optional<std::string>& pred, const std::string& truth,
                          const Taxonomy& taxonomy) {
  taxonomy.require(truth);
  if (!pred) return 0.0;
  taxonomy.require(*pred);
  if (*pred == truth) return 1.0;

  // Two-level BFS over the relation graph is all the rubric distinguishes.
  std::set<std::string> ring{truth};
  std::set<std::string> seen{truth};
  for (int depth = 1; depth <= 2; ++depth) {
    std::set<std::string> next;
    for (const std::string& id : ring) {
      for (const std::string& neighbor : taxonomy.neighbors(id)) {
        if (seen.insert(neighbor).second) next.insert(neighbor);
      }
    }
    if (next.count(*pred)) return depth == 1 ? 0.75 : 0.5;
    ring = std::move(next);
  }
  return 0.0;
}

}  // namespace caseforge
