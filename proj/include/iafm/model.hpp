#pragma once

#include <numeric>

#include "iafm/nn.hpp"
#include "iafm/stream.hpp"

namespace iafm {

struct ModelConfig {
  int vocab_size = 0;
  int embed_dim = 128;
  int depth = 4;
  int heads = 4;
  int max_stream_len = 512;
  int visual_dim = 128;  // encoder latent width feeding the projection
  int class_count = 10;

  void validate() const {
    check(vocab_size > 0, "model config: vocab size required");
    check(embed_dim % heads == 0, "model config: embed dim not divisible by heads");
    check(max_stream_len >= 2, "model config: max stream length too small");
  }
};

template <class T>
struct DecodeResult {
  std::vector<int> span;  // [STARTACTION] ... ; includes control tokens
  bool ended = false;     // saw [ENDOFACTION] before max_len
};

// Causal transformer over interleaved text/visual/action/state positions.
// Visual positions enter through a jointly trained affine projection from
// the encoder latent space; everything else through the token table. A
// learned begin-of-stream row precedes the stream so position 0 has a
// prediction context.
template <class T>
class AgentModel {
 public:
  AgentModel(const ModelConfig& cfg, Rng& rng, double init_std = 0.02) : cfg_(cfg) {
    cfg_.validate();
    tok_embed_ = ps_.weight("model.tok_embed", {cfg_.vocab_size, cfg_.embed_dim}, rng, init_std);
    pos_embed_ = ps_.weight("model.pos_embed", {cfg_.max_stream_len + 1, cfg_.embed_dim}, rng, init_std);
    bos_ = ps_.weight("model.bos", {1, cfg_.embed_dim}, rng, init_std);
    proj_w_ = ps_.weight("model.proj.w", {cfg_.visual_dim, cfg_.embed_dim}, rng, init_std);
    proj_b_ = ps_.zeros("model.proj.b", {cfg_.embed_dim});
    for (int i = 0; i < cfg_.depth; ++i)
      blocks_.push_back(make_block(ps_, "model.block" + std::to_string(i), cfg_.embed_dim, rng, init_std));
    final_ln_ = make_ln(ps_, "model.ln", cfg_.embed_dim);
    head_w_ = ps_.weight("model.head.w", {cfg_.embed_dim, cfg_.vocab_size}, rng, init_std);
    head_b_ = ps_.zeros("model.head.b", {cfg_.vocab_size});
    class_w_ = ps_.weight("model.class.w", {cfg_.visual_dim, cfg_.class_count}, rng, init_std);
    class_b_ = ps_.zeros("model.class.b", {cfg_.class_count});
  }

  const ModelConfig& config() const { return cfg_; }
  const std::vector<std::pair<std::string, Tensor<T>>>& named_parameters() const { return ps_.named; }
  std::vector<Tensor<T>> parameters() const { return ps_.tensors(); }

  // Affine map from visual latent space into the token embedding space.
  Tensor<T> project_visual(const Tensor<T>& latents) const {
    check(latents.dim(1) == cfg_.visual_dim, "project_visual: latent dim mismatch");
    return add_rows(matmul(latents, proj_w_), proj_b_);
  }

  // Returns [L+1, vocab]: row p carries the next-token distribution for
  // stream position p; the final row predicts the continuation.
  Tensor<T> forward(const TokenStream& stream, const std::vector<Tensor<T>>& frame_latents) const {
    const auto flat = flatten(stream);
    const int64_t L = static_cast<int64_t>(flat.size());
    check(L + 1 <= cfg_.max_stream_len + 1,
          "forward: stream length " + std::to_string(L) + " exceeds max " +
              std::to_string(cfg_.max_stream_len));
    check(frame_latents.size() == stream.frames.size(), "forward: latent count vs frames");
    for (size_t t = 0; t < frame_latents.size(); ++t) {
      check(frame_latents[t].dim(0) == stream.frames[t].visible_count,
            "forward: latent rows vs visible count at frame " + std::to_string(t));
      if (frame_latents[t].dim(0) > 0)
        check(frame_latents[t].dim(1) == cfg_.visual_dim, "forward: latent dim mismatch");
    }

    std::vector<int> token_ids;
    std::vector<int> token_pos;
    std::vector<int> visual_pos;
    for (int64_t p = 0; p < L; ++p) {
      const auto& sp = flat[static_cast<size_t>(p)];
      if (sp.modality == Modality::visual) {
        visual_pos.push_back(static_cast<int>(p + 1));
      } else {
        check(sp.token_id >= 0 && sp.token_id < cfg_.vocab_size,
              "forward: token id " + std::to_string(sp.token_id) + " outside vocabulary");
        token_ids.push_back(sp.token_id);
        token_pos.push_back(static_cast<int>(p + 1));
      }
    }

    std::vector<Tensor<T>> pieces;
    pieces.push_back(row_scatter(L + 1, {0}, bos_));
    if (!token_ids.empty())
      pieces.push_back(row_scatter(L + 1, token_pos, embedding(tok_embed_, token_ids)));
    if (!visual_pos.empty()) {
      std::vector<Tensor<T>> nonempty;
      for (const auto& lt : frame_latents)
        if (lt.dim(0) > 0) nonempty.push_back(lt);
      auto vis = project_visual(nonempty.size() == 1 ? nonempty[0] : concat_rows(nonempty));
      check(vis.dim(0) == static_cast<int64_t>(visual_pos.size()), "forward: visual row count");
      pieces.push_back(row_scatter(L + 1, visual_pos, vis));
    }
    Tensor<T> x = pieces[0];
    for (size_t i = 1; i < pieces.size(); ++i) x = add(x, pieces[i]);

    std::vector<int> prange(static_cast<size_t>(L + 1));
    std::iota(prange.begin(), prange.end(), 0);
    x = add(x, gather_rows(pos_embed_, prange));

    const auto mask = causal_mask<T>(L + 1);
    for (const auto& blk : blocks_) x = block_forward(x, blk, cfg_.heads, &mask);
    x = layer_norm(x, final_ln_.g, final_ln_.b);
    return add_rows(matmul(x, head_w_), head_b_);
  }

  // The per-position rows alone: [L, vocab], row p for stream position p.
  Tensor<T> forward_positions(const TokenStream& stream,
                              const std::vector<Tensor<T>>& frame_latents) const {
    auto all = forward(stream, frame_latents);
    std::vector<int> rows(static_cast<size_t>(all.dim(0) - 1));
    std::iota(rows.begin(), rows.end(), 0);
    return gather_rows(all, rows);
  }

  // Class logits over the pooled video embedding: [1, class_count].
  Tensor<T> classify_video(const Tensor<T>& pooled) const {
    check(pooled.ndim() == 2 && pooled.dim(0) == 1 && pooled.dim(1) == cfg_.visual_dim,
          "classify_video: pooled embedding shape mismatch");
    return add_rows(matmul(pooled, class_w_), class_b_);
  }

  // Greedy (or temperature-sampled) autoregressive action decode. The span
  // opens with a forced [STARTACTION] and closes at [ENDOFACTION] or
  // max_len. With constrain_to_agent_tokens, text ids are never emitted.
  DecodeResult<T> predict_action(TokenStream stream, std::vector<Tensor<T>> frame_latents,
                                 const Vocabulary& vocab, int max_len,
                                 bool constrain_to_agent_tokens = true, double temperature = 0.0,
                                 Rng* rng = nullptr) const {
    check(!stream.frames.empty(), "predict_action: no current frame");
    check(stream.frames.back().action_ids.empty(), "predict_action: last frame already has actions");
    check(max_len >= 1, "predict_action: max_len >= 1 required");
    NoGradGuard ng;

    DecodeResult<T> out;
    auto& span = stream.frames.back().action_ids;
    span.push_back(vocab.start_action);
    out.span.push_back(vocab.start_action);
    while (static_cast<int>(out.span.size()) < max_len) {
      auto logits = forward(stream, frame_latents);
      const int64_t V = logits.dim(1);
      const T* row = logits.ptr() + (logits.dim(0) - 1) * V;
      const int lo = constrain_to_agent_tokens ? vocab.agent_begin() : 0;
      int next = lo;
      if (temperature <= 0.0) {
        for (int j = lo; j < V; ++j)
          if (row[j] > row[next]) next = j;
      } else {
        check(rng != nullptr, "predict_action: sampling requires an rng");
        double mx = static_cast<double>(row[lo]);
        for (int j = lo; j < V; ++j) mx = std::max(mx, static_cast<double>(row[j]));
        std::vector<double> probs(static_cast<size_t>(V - lo));
        double sum = 0;
        for (int j = lo; j < V; ++j) {
          probs[static_cast<size_t>(j - lo)] =
              std::exp((static_cast<double>(row[j]) - mx) / temperature);
          sum += probs[static_cast<size_t>(j - lo)];
        }
        double r = rng->uniform() * sum, acc = 0;
        next = V - 1;
        for (int j = lo; j < V; ++j) {
          acc += probs[static_cast<size_t>(j - lo)];
          if (r < acc) {
            next = j;
            break;
          }
        }
      }
      span.push_back(next);
      out.span.push_back(next);
      if (next == vocab.end_action) {
        out.ended = true;
        break;
      }
    }
    return out;
  }

 private:
  ModelConfig cfg_;
  ParamStore<T> ps_;
  Tensor<T> tok_embed_, pos_embed_, bos_, proj_w_, proj_b_;
  std::vector<Block<T>> blocks_;
  Lnp<T> final_ln_;
  Tensor<T> head_w_, head_b_, class_w_, class_b_;
};

// Summed NLL of the routed targets of one class. count receives the number
// of scored targets.
template <class T>
Tensor<T> routed_loss(const Tensor<T>& logits, const TokenStream& stream, LossFlag cls,
                      int64_t* count = nullptr) {
  std::vector<int> rows;
  std::vector<int> targets;
  for (const auto& t : loss_routing(stream)) {
    if (t.cls != cls) continue;
    rows.push_back(static_cast<int>(t.position));
    targets.push_back(t.target_id);
  }
  if (count) *count = static_cast<int64_t>(rows.size());
  if (rows.empty()) return Tensor<T>::zeros({1});
  return cross_entropy_sum(gather_rows(logits, rows), targets);
}

template <class T>
Tensor<T> lang_loss(const Tensor<T>& logits, const TokenStream& stream, int64_t* count = nullptr) {
  return routed_loss<T>(logits, stream, LossFlag::lang, count);
}

template <class T>
Tensor<T> act_loss(const Tensor<T>& logits, const TokenStream& stream, int64_t* count = nullptr) {
  return routed_loss<T>(logits, stream, LossFlag::act, count);
}

// (L_lang + L_mae + L_act) / (|W| + sum_t (|V_t| + |A_t|))
template <class T>
Tensor<T> total_loss(const Tensor<T>& lang, const Tensor<T>& mae, const Tensor<T>& act,
                     int64_t denominator) {
  check(denominator > 0, "total_loss: zero denominator");
  return scale(add(add(lang, mae), act), 1.0 / static_cast<double>(denominator));
}

}  // namespace iafm
