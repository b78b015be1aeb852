#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "iafm/codec.hpp"

namespace iafm {

// Unified token table: text tokens first, then the three shared control
// tokens, then each domain's agent tokens in declared order. Immutable
// after build.
struct Vocabulary {
  struct DomainInfo {
    std::string name;
    int begin = 0;          // first id of this domain's block
    int action_count = 0;
    int state_count = 0;
  };

  std::vector<std::string> tokens;
  std::unordered_map<std::string, int> index;
  int text_count = 0;
  int start_action = -1;
  int end_action = -1;
  int end_trajectory = -1;
  std::vector<DomainInfo> domains;

  int size() const { return static_cast<int>(tokens.size()); }
  int agent_begin() const { return text_count; }
  bool is_agent(int id) const { return id >= text_count && id < size(); }
  bool contains(const std::string& tok) const { return index.count(tok) > 0; }

  int id_of(const std::string& tok) const;
  const std::string& token(int id) const;
  const DomainInfo& domain(const std::string& name) const;

  std::vector<int> ids_of(const std::vector<std::string>& toks) const;
  std::vector<std::string> tokens_of(const std::vector<int>& ids) const;
};

Vocabulary build_vocabulary(const std::vector<std::string>& text_tokens,
                            const std::vector<DomainActionSpace>& spaces);

// Line-delimited export; id = line index.
void save_token_list(const Vocabulary& vocab, const std::string& path);
std::vector<std::string> load_token_list(const std::string& path);

// Byte-level text tokens: id == byte value, 256 entries named "<0xNN>".
std::vector<std::string> byte_text_tokens();
std::vector<int> encode_text(const std::string& text);
std::string decode_text(const std::vector<int>& ids);

}  // namespace iafm
