#pragma once

#include "iafm/nn.hpp"

namespace iafm {

// Frames cut into patch-pixel rows. Row-major patch order; pixels stay in
// [0,1] and round-trip exactly through unpatchify.
template <class T>
struct PatchGrid {
  int frame_count = 0;
  int grid_rows = 0;
  int grid_cols = 0;
  int patch_size = 16;
  int height = 0;
  int width = 0;
  std::vector<Tensor<T>> patch_pixels;  // per frame, [patches, patch_size^2 * 3]

  int patches_per_frame() const { return grid_rows * grid_cols; }
  int patch_dim() const { return patch_size * patch_size * 3; }
};

// frames: row-major [T, H, W, 3].
template <class T>
PatchGrid<T> patchify(const std::vector<T>& frames, int frame_count, int height, int width,
                      int patch_size) {
  check(frame_count >= 1, "patchify: no frames");
  check(patch_size >= 1, "patchify: bad patch size");
  check(height % patch_size == 0 && width % patch_size == 0,
        "patchify: frame " + std::to_string(height) + "x" + std::to_string(width) +
            " not divisible by patch size " + std::to_string(patch_size));
  const int64_t frame_elems = static_cast<int64_t>(height) * width * 3;
  check(static_cast<int64_t>(frames.size()) == frame_elems * frame_count,
        "patchify: pixel buffer size mismatch");
  for (T v : frames)
    check(v >= T(0) && v <= T(1), "patchify: pixel outside [0,1]");

  PatchGrid<T> g;
  g.frame_count = frame_count;
  g.grid_rows = height / patch_size;
  g.grid_cols = width / patch_size;
  g.patch_size = patch_size;
  g.height = height;
  g.width = width;
  const int ppf = g.patches_per_frame();
  const int pd = g.patch_dim();
  for (int t = 0; t < frame_count; ++t) {
    auto pt = Tensor<T>::zeros({ppf, pd});
    const T* src = frames.data() + t * frame_elems;
    for (int pr = 0; pr < g.grid_rows; ++pr)
      for (int pc = 0; pc < g.grid_cols; ++pc) {
        T* dst = pt.ptr() + static_cast<int64_t>(pr * g.grid_cols + pc) * pd;
        for (int y = 0; y < patch_size; ++y)
          for (int x = 0; x < patch_size; ++x)
            for (int c = 0; c < 3; ++c)
              *dst++ = src[((pr * patch_size + y) * static_cast<int64_t>(width) +
                            (pc * patch_size + x)) * 3 + c];
      }
    g.patch_pixels.push_back(std::move(pt));
  }
  return g;
}

template <class T>
std::vector<T> unpatchify(const PatchGrid<T>& g) {
  const int64_t frame_elems = static_cast<int64_t>(g.height) * g.width * 3;
  std::vector<T> frames(static_cast<size_t>(frame_elems * g.frame_count));
  const int pd = g.patch_dim();
  for (int t = 0; t < g.frame_count; ++t) {
    T* dst = frames.data() + t * frame_elems;
    const T* pt = g.patch_pixels[static_cast<size_t>(t)].ptr();
    for (int pr = 0; pr < g.grid_rows; ++pr)
      for (int pc = 0; pc < g.grid_cols; ++pc) {
        const T* src = pt + static_cast<int64_t>(pr * g.grid_cols + pc) * pd;
        for (int y = 0; y < g.patch_size; ++y)
          for (int x = 0; x < g.patch_size; ++x)
            for (int c = 0; c < 3; ++c)
              dst[((pr * g.patch_size + y) * static_cast<int64_t>(g.width) +
                   (pc * g.patch_size + x)) * 3 + c] = *src++;
      }
  }
  return frames;
}

// Interleaved sin/cos at geometric frequencies, base 10000. Fixed, not
// learned. Row p: [sin(p w0), cos(p w0), sin(p w1), cos(p w1), ...].
template <class T>
Tensor<T> sinusoidal_positions(int64_t n, int64_t d) {
  check(d >= 2 && d % 2 == 0, "sinusoidal_positions: dim must be even");
  auto pe = Tensor<T>::zeros({n, d});
  for (int64_t p = 0; p < n; ++p)
    for (int64_t i = 0; i < d / 2; ++i) {
      const double freq = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(d));
      pe.ptr()[p * d + 2 * i] = static_cast<T>(std::sin(p * freq));
      pe.ptr()[p * d + 2 * i + 1] = static_cast<T>(std::cos(p * freq));
    }
  return pe;
}

enum class MaskMode { frame_independent, tubelet };

struct MaskPlan {
  MaskMode mode = MaskMode::frame_independent;
  double ratio = 0.75;
  int patches_per_frame = 0;
  std::vector<std::vector<int>> masked;   // ascending patch indices per frame
  std::vector<std::vector<int>> visible;  // complements, ascending

  int frame_count() const { return static_cast<int>(masked.size()); }
};

// Uniform subset without replacement, exactly round(ratio * ppf) per frame.
// Tubelet mode reuses one spatial mask across all frames.
inline MaskPlan sample_mask(int patches_per_frame, int frame_count, double ratio, MaskMode mode,
                            uint64_t seed) {
  check(ratio >= 0.0 && ratio < 1.0, "sample_mask: ratio must be in [0,1)");
  check(patches_per_frame >= 1 && frame_count >= 1, "sample_mask: empty geometry");
  const int n_masked = static_cast<int>(std::llround(ratio * patches_per_frame));
  check(n_masked < patches_per_frame, "sample_mask: ratio leaves no visible patches");
  MaskPlan plan;
  plan.mode = mode;
  plan.ratio = ratio;
  plan.patches_per_frame = patches_per_frame;
  Rng rng = Rng::substream(seed, "mask");
  std::vector<int> shared;
  if (mode == MaskMode::tubelet) shared = rng.sample_without_replacement(patches_per_frame, n_masked);
  for (int t = 0; t < frame_count; ++t) {
    std::vector<int> m = mode == MaskMode::tubelet
                             ? shared
                             : rng.sample_without_replacement(patches_per_frame, n_masked);
    std::vector<bool> is_masked(static_cast<size_t>(patches_per_frame), false);
    for (int i : m) is_masked[static_cast<size_t>(i)] = true;
    std::vector<int> vis;
    for (int i = 0; i < patches_per_frame; ++i)
      if (!is_masked[static_cast<size_t>(i)]) vis.push_back(i);
    plan.masked.push_back(std::move(m));
    plan.visible.push_back(std::move(vis));
  }
  return plan;
}

struct MaeConfig {
  int patch_size = 16;
  int embed_dim = 128;
  int depth = 4;
  int heads = 4;
  int dec_dim = 64;
  int dec_depth = 2;
  int dec_heads = 4;
  bool video_mode = false;    // temporal attention after each spatial layer
  bool raw_sum_loss = false;  // summed squared error instead of per-frame mean
  int max_patches = 1024;
  int max_frames = 16;

  void validate() const {
    check(embed_dim % heads == 0, "mae config: embed dim not divisible by heads");
    check(dec_dim % dec_heads == 0, "mae config: decoder dim not divisible by heads");
    check(embed_dim % 2 == 0 && dec_dim % 2 == 0, "mae config: dims must be even");
    check(depth >= 1 && dec_depth >= 1, "mae config: depth must be >= 1");
  }
};

template <class T>
struct EncodeResult {
  std::vector<Tensor<T>> frame_latents;  // per frame, [visible, embed_dim]
  Tensor<T> pooled;                      // [1, embed_dim], mean over final latents
};

// Masked-autoencoder visual module: patch embedding with sinusoidal
// positions, spatial (and, in video mode, alternating temporal) attention
// over visible patches, and a light decoder that reconstructs masked
// patches from latents plus a learned mask token.
template <class T>
class VisualMae {
 public:
  VisualMae(const MaeConfig& cfg, Rng& rng, double init_std = 0.02) : cfg_(cfg) {
    cfg_.validate();
    const int pd = cfg_.patch_size * cfg_.patch_size * 3;
    patch_w_ = ps_.weight("enc.patch.w", {pd, cfg_.embed_dim}, rng, init_std);
    patch_b_ = ps_.zeros("enc.patch.b", {cfg_.embed_dim});
    for (int i = 0; i < cfg_.depth; ++i) {
      blocks_.push_back(make_block(ps_, "enc.block" + std::to_string(i), cfg_.embed_dim, rng, init_std));
      if (cfg_.video_mode) {
        temporal_ln_.push_back(make_ln(ps_, "enc.block" + std::to_string(i) + ".lnt", cfg_.embed_dim));
        temporal_attn_.push_back(
            make_attn(ps_, "enc.block" + std::to_string(i) + ".tattn", cfg_.embed_dim, rng, init_std));
      }
    }
    enc_ln_ = make_ln(ps_, "enc.ln", cfg_.embed_dim);
    dec_embed_w_ = ps_.weight("dec.embed.w", {cfg_.embed_dim, cfg_.dec_dim}, rng, init_std);
    dec_embed_b_ = ps_.zeros("dec.embed.b", {cfg_.dec_dim});
    mask_token_ = ps_.weight("dec.mask_token", {1, cfg_.dec_dim}, rng, init_std);
    for (int i = 0; i < cfg_.dec_depth; ++i)
      dec_blocks_.push_back(make_block(ps_, "dec.block" + std::to_string(i), cfg_.dec_dim, rng, init_std));
    dec_ln_ = make_ln(ps_, "dec.ln", cfg_.dec_dim);
    head_w_ = ps_.weight("dec.head.w", {cfg_.dec_dim, pd}, rng, init_std);
    head_b_ = ps_.zeros("dec.head.b", {pd});
    enc_pos_ = sinusoidal_positions<T>(cfg_.max_patches, cfg_.embed_dim);
    dec_pos_ = sinusoidal_positions<T>(cfg_.max_patches, cfg_.dec_dim);
    time_pos_ = sinusoidal_positions<T>(cfg_.max_frames, cfg_.embed_dim);
  }

  const MaeConfig& config() const { return cfg_; }
  const std::vector<std::pair<std::string, Tensor<T>>>& named_parameters() const { return ps_.named; }
  std::vector<Tensor<T>> parameters() const { return ps_.tensors(); }

  // Only visible patches are embedded and attended.
  EncodeResult<T> encode(const PatchGrid<T>& grid, const MaskPlan& plan) const {
    check_plan(grid, plan);
    const int Tn = grid.frame_count;
    check(Tn <= cfg_.max_frames, "mae encode: too many frames");
    check(grid.patches_per_frame() <= cfg_.max_patches, "mae encode: too many patches");

    std::vector<Tensor<T>> xs;
    xs.reserve(static_cast<size_t>(Tn));
    for (int t = 0; t < Tn; ++t) {
      const auto& vis = plan.visible[static_cast<size_t>(t)];
      auto x = gather_rows(grid.patch_pixels[static_cast<size_t>(t)], vis);
      x = add_rows(matmul(x, patch_w_), patch_b_);
      x = add(x, gather_rows(enc_pos_, vis));
      if (cfg_.video_mode) {
        auto trow = gather_rows(time_pos_, std::vector<int>{t});
        x = add(x, tile_rows(trow, x.dim(0)));
      }
      xs.push_back(std::move(x));
    }

    for (int layer = 0; layer < cfg_.depth; ++layer) {
      const auto& blk = blocks_[static_cast<size_t>(layer)];
      for (auto& x : xs)
        x = add(x, multi_head_attention(layer_norm(x, blk.ln1.g, blk.ln1.b), blk.attn, cfg_.heads));
      if (cfg_.video_mode)
        temporal_layer(xs, plan, layer);
      for (auto& x : xs)
        x = add(x, mlp_forward(layer_norm(x, blk.ln2.g, blk.ln2.b), blk));
    }

    EncodeResult<T> out;
    int64_t total = 0;
    for (auto& x : xs) {
      x = layer_norm(x, enc_ln_.g, enc_ln_.b);
      total += x.dim(0);
      out.frame_latents.push_back(x);
    }
    check(total > 0, "mae encode: no visible patches");
    out.pooled = scale(sum_rows(concat_rows(out.frame_latents)), 1.0 / static_cast<double>(total));
    return out;
  }

  // One predicted pixel vector per masked patch, in ascending patch order.
  std::vector<Tensor<T>> decode_reconstruct(const std::vector<Tensor<T>>& latents,
                                            const MaskPlan& plan) const {
    check(static_cast<int>(latents.size()) == plan.frame_count(), "mae decode: plan mismatch");
    std::vector<Tensor<T>> preds;
    const int pd = cfg_.patch_size * cfg_.patch_size * 3;
    for (size_t t = 0; t < latents.size(); ++t) {
      const auto& vis = plan.visible[t];
      const auto& msk = plan.masked[t];
      check(latents[t].dim(0) == static_cast<int64_t>(vis.size()),
            "mae decode: latents do not match plan (frame " + std::to_string(t) + ")");
      if (msk.empty()) {
        preds.push_back(Tensor<T>::zeros({0, pd}));
        continue;
      }
      const int ppf = plan.patches_per_frame;
      auto vis_tok = add_rows(matmul(latents[t], dec_embed_w_), dec_embed_b_);
      auto x = add(row_scatter(ppf, vis, vis_tok),
                   row_scatter(ppf, msk, tile_rows(mask_token_, static_cast<int64_t>(msk.size()))));
      std::vector<int> all(static_cast<size_t>(ppf));
      for (int i = 0; i < ppf; ++i) all[static_cast<size_t>(i)] = i;
      x = add(x, gather_rows(dec_pos_, all));
      for (const auto& blk : dec_blocks_) x = block_forward(x, blk, cfg_.dec_heads);
      x = layer_norm(x, dec_ln_.g, dec_ln_.b);
      auto pixels = add_rows(matmul(x, head_w_), head_b_);
      preds.push_back(gather_rows(pixels, msk));
    }
    return preds;
  }

  // Mean squared error over (masked patches x pixels) per frame, summed over
  // frames; raw_sum_loss switches to the plain summed squared error.
  Tensor<T> mae_loss(const PatchGrid<T>& grid, const std::vector<Tensor<T>>& preds,
                     const MaskPlan& plan) const {
    check_plan(grid, plan);
    check(static_cast<int>(preds.size()) == plan.frame_count(), "mae_loss: prediction count");
    const int pd = grid.patch_dim();
    Tensor<T> total = Tensor<T>::zeros({1});
    for (size_t t = 0; t < preds.size(); ++t) {
      const auto& msk = plan.masked[t];
      check(preds[t].dim(0) == static_cast<int64_t>(msk.size()) &&
                (msk.empty() || preds[t].dim(1) == pd),
            "mae_loss: shape mismatch at frame " + std::to_string(t));
      if (msk.empty()) continue;
      auto target = gather_rows(grid.patch_pixels[t], msk);
      auto diff = sub(preds[t], target);
      auto sq = sum_all(mul(diff, diff));
      if (!cfg_.raw_sum_loss)
        sq = scale(sq, 1.0 / (static_cast<double>(msk.size()) * pd));
      total = add(total, sq);
    }
    return total;
  }

 private:
  void check_plan(const PatchGrid<T>& grid, const MaskPlan& plan) const {
    check(plan.frame_count() == grid.frame_count, "mae: mask plan frame count mismatch");
    check(plan.patches_per_frame == grid.patches_per_frame(), "mae: mask plan geometry mismatch");
  }

  // Attention across frames at the same spatial index. Groups are gathered
  // from the frame concat, attended, and scattered back by a permutation.
  void temporal_layer(std::vector<Tensor<T>>& xs, const MaskPlan& plan, int layer) const {
    const auto& ln = temporal_ln_[static_cast<size_t>(layer)];
    const auto& attn = temporal_attn_[static_cast<size_t>(layer)];
    std::vector<int64_t> offset(xs.size() + 1, 0);
    for (size_t t = 0; t < xs.size(); ++t) offset[t + 1] = offset[t] + xs[t].dim(0);
    auto all = concat_rows(xs);
    auto normed = layer_norm(all, ln.g, ln.b);

    // patch index -> global rows across frames
    std::vector<std::vector<int>> groups(static_cast<size_t>(plan.patches_per_frame));
    for (size_t t = 0; t < xs.size(); ++t) {
      const auto& vis = plan.visible[t];
      for (size_t r = 0; r < vis.size(); ++r)
        groups[static_cast<size_t>(vis[r])].push_back(static_cast<int>(offset[t] + static_cast<int64_t>(r)));
    }

    std::vector<Tensor<T>> outs;
    std::vector<int> order;
    for (const auto& g : groups) {
      if (g.empty()) continue;
      outs.push_back(multi_head_attention(gather_rows(normed, g), attn, cfg_.heads));
      order.insert(order.end(), g.begin(), g.end());
    }
    auto grouped = concat_rows(outs);
    // inverse permutation back to stream order
    std::vector<int> inv(order.size());
    for (size_t i = 0; i < order.size(); ++i) inv[static_cast<size_t>(order[i])] = static_cast<int>(i);
    auto residual = add(all, gather_rows(grouped, inv));
    for (size_t t = 0; t < xs.size(); ++t) {
      std::vector<int> range(static_cast<size_t>(xs[t].dim(0)));
      for (size_t r = 0; r < range.size(); ++r) range[r] = static_cast<int>(offset[t] + static_cast<int64_t>(r));
      xs[t] = gather_rows(residual, range);
    }
  }

  MaeConfig cfg_;
  ParamStore<T> ps_;
  Tensor<T> patch_w_, patch_b_;
  std::vector<Block<T>> blocks_;
  std::vector<Lnp<T>> temporal_ln_;
  std::vector<AttnParams<T>> temporal_attn_;
  Lnp<T> enc_ln_;
  Tensor<T> dec_embed_w_, dec_embed_b_, mask_token_;
  std::vector<Block<T>> dec_blocks_;
  Lnp<T> dec_ln_;
  Tensor<T> head_w_, head_b_;
  Tensor<T> enc_pos_, dec_pos_, time_pos_;
};

}  // namespace iafm
