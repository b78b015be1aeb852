#include "iafm/vocab.hpp"

#include <cstdio>
#include <fstream>

#include "iafm/common.hpp"

namespace iafm {

int Vocabulary::id_of(const std::string& tok) const {
  auto it = index.find(tok);
  check(it != index.end(), "vocabulary: unknown token '" + tok + "'");
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  check(id >= 0 && id < size(), "vocabulary: id " + std::to_string(id) + " out of range");
  return tokens[static_cast<size_t>(id)];
}

const Vocabulary::DomainInfo& Vocabulary::domain(const std::string& name) const {
  for (const auto& d : domains)
    if (d.name == name) return d;
  throw std::runtime_error("vocabulary: unknown domain '" + name + "'");
}

std::vector<int> Vocabulary::ids_of(const std::vector<std::string>& toks) const {
  std::vector<int> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(id_of(t));
  return out;
}

std::vector<std::string> Vocabulary::tokens_of(const std::vector<int>& ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (int id : ids) out.push_back(token(id));
  return out;
}

Vocabulary build_vocabulary(const std::vector<std::string>& text_tokens,
                            const std::vector<DomainActionSpace>& spaces) {
  check(!text_tokens.empty(), "build_vocabulary: empty text vocabulary");
  Vocabulary v;
  auto push = [&](const std::string& tok) {
    check(!v.index.count(tok), "build_vocabulary: duplicate token '" + tok + "'");
    v.index[tok] = v.size();
    v.tokens.push_back(tok);
  };

  for (const auto& t : text_tokens) push(t);
  v.text_count = v.size();

  push(kStartAction);
  push(kEndAction);
  push(kEndTrajectory);
  v.start_action = v.id_of(kStartAction);
  v.end_action = v.id_of(kEndAction);
  v.end_trajectory = v.id_of(kEndTrajectory);

  for (const auto& s : spaces) {
    Vocabulary::DomainInfo info;
    info.name = s.name;
    info.begin = v.size();
    for (const auto& tok : s.action_token_strings()) push(tok);
    info.action_count = v.size() - info.begin;
    const int state_begin = v.size();
    for (const auto& tok : s.state_token_strings()) push(tok);
    info.state_count = v.size() - state_begin;
    check(info.action_count == s.action_token_count(), "build_vocabulary: action count drift");
    check(info.state_count == s.state_token_count(), "build_vocabulary: state count drift");
    v.domains.push_back(std::move(info));
  }
  return v;
}

void save_token_list(const Vocabulary& vocab, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "save_token_list: cannot open " + path);
  for (const auto& t : vocab.tokens) out << t << "\n";
  check(out.good(), "save_token_list: write failed for " + path);
}

std::vector<std::string> load_token_list(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "load_token_list: cannot open " + path);
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) tokens.push_back(line);
  return tokens;
}

std::vector<std::string> byte_text_tokens() {
  std::vector<std::string> out;
  out.reserve(256);
  char buf[8];
  for (int b = 0; b < 256; ++b) {
    std::snprintf(buf, sizeof(buf), "<0x%02X>", b);
    out.emplace_back(buf);
  }
  return out;
}

std::vector<int> encode_text(const std::string& text) {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (unsigned char c : text) ids.push_back(static_cast<int>(c));
  return ids;
}

std::string decode_text(const std::vector<int>& ids) {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) {
    check(id >= 0 && id < 256, "decode_text: id out of byte range");
    out.push_back(static_cast<char>(id));
  }
  return out;
}

}  // namespace iafm
