#include "crossmae/model/mae.hpp"

#include <cmath>

#include "crossmae/core/errors.hpp"

namespace crossmae::model {

namespace {

const char* mod_name(Modality m) { return m == Modality::sat ? "sat" : "uav"; }

struct Binder {
  ad::Tape& tape;
  const ParamStore& store;
  bool train;
  std::map<std::string, ad::Var> bound;

  ad::Var operator()(const std::string& name) {
    auto it = bound.find(name);
    if (it != bound.end()) return it->second;
    const ad::Var v = tape.leaf(store.at(name), train);
    bound.emplace(name, v);
    return v;
  }
};

// Multi-head scaled dot-product attention; q_in (n x D), kv_in (m x D).
ad::Var attention(ad::Tape& t, Binder& p, const std::string& prefix, ad::Var q_in,
                  ad::Var kv_in, int heads) {
  const ad::Var q = t.add_rowvec(t.matmul(q_in, p(prefix + ".wq")), p(prefix + ".bq"));
  const ad::Var k = t.add_rowvec(t.matmul(kv_in, p(prefix + ".wk")), p(prefix + ".bk"));
  const ad::Var v = t.add_rowvec(t.matmul(kv_in, p(prefix + ".wv")), p(prefix + ".bv"));
  const int dim = static_cast<int>(t.val(q).cols());
  const int dh = dim / heads;
  std::vector<ad::Var> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    const ad::Var qh = t.slice_cols(q, h * dh, dh);
    const ad::Var kh = t.slice_cols(k, h * dh, dh);
    const ad::Var vh = t.slice_cols(v, h * dh, dh);
    const ad::Var scores =
        t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    const ad::Var attn = t.softmax_rows(scores);
    outs.push_back(t.matmul(attn, vh));
  }
  const ad::Var merged = heads == 1 ? outs[0] : t.concat_cols(outs);
  return t.add_rowvec(t.matmul(merged, p(prefix + ".wo")), p(prefix + ".bo"));
}

ad::Var mlp(ad::Tape& t, Binder& p, const std::string& prefix, ad::Var x) {
  ad::Var h = t.add_rowvec(t.matmul(x, p(prefix + ".w1")), p(prefix + ".b1"));
  h = t.gelu(h);
  return t.add_rowvec(t.matmul(h, p(prefix + ".w2")), p(prefix + ".b2"));
}

ad::Var ln(ad::Tape& t, Binder& p, const std::string& prefix, ad::Var x) {
  return t.layer_norm(x, p(prefix + ".gamma"), p(prefix + ".beta"));
}

ad::Var encode_impl(ad::Tape& tape, Binder& p, ad::Var tokens, const ModelConfig& cfg) {
  ad::Var x = tokens;
  for (int i = 0; i < cfg.enc_depth; ++i) {
    const std::string b = "enc.block" + std::to_string(i);
    const ad::Var n1 = ln(tape, p, b + ".ln1", x);
    x = tape.add(x, attention(tape, p, b + ".attn", n1, n1, cfg.enc_heads));
    x = tape.add(x, mlp(tape, p, b + ".mlp", ln(tape, p, b + ".ln2", x)));
  }
  return x;
}

ad::Var decode_impl(ad::Tape& tape, Binder& p, ad::Var latents,
                    const masking::MaskPlan& plan, Modality modality,
                    const ModelConfig& cfg) {
  const std::string d = std::string("dec.") + mod_name(modality);
  const int tokens = cfg.tokens_per_modality();

  // All encoder latents, projected to decoder width; cross-attention context.
  const ad::Var ctx =
      tape.add_rowvec(tape.matmul(latents, p(d + ".embed.w")), p(d + ".embed.b"));

  // Query sequence: mask tokens everywhere, visible positions overwritten by
  // this modality's projected latents, then the decoder position table.
  const std::vector<int>& visible =
      modality == Modality::sat ? plan.visible_sat : plan.visible_uav;
  ad::Var x = tape.broadcast_row(p(d + ".mask_token"), tokens);
  if (!visible.empty()) {
    const int offset =
        modality == Modality::sat ? 0 : static_cast<int>(plan.visible_sat.size());
    std::vector<int> latent_rows(visible.size());
    for (size_t i = 0; i < visible.size(); ++i)
      latent_rows[i] = offset + static_cast<int>(i);
    const ad::Var own = tape.gather_rows(ctx, latent_rows);
    x = tape.scatter_rows(x, own, visible);
  }
  x = tape.add_const(
      x, tokenizer::sincos_position_table(cfg.geometry().grid(), cfg.dec_dim));

  for (int i = 0; i < cfg.dec_depth; ++i) {
    const std::string b = d + ".block" + std::to_string(i);
    x = tape.add(x, attention(tape, p, b + ".cross", ln(tape, p, b + ".lnq", x), ctx,
                              cfg.dec_heads));
    {
      const ad::Var n = ln(tape, p, b + ".lns", x);
      x = tape.add(x, attention(tape, p, b + ".self", n, n, cfg.dec_heads));
    }
    x = tape.add(x, mlp(tape, p, b + ".mlp", ln(tape, p, b + ".lnm", x)));
  }
  x = ln(tape, p, d + ".norm", x);
  return tape.add_rowvec(tape.matmul(x, p(d + ".head.w")), p(d + ".head.b"));
}

}  // namespace

void ModelConfig::validate() const {
  geometry().validate();
  if (enc_dim <= 0 || dec_dim <= 0 || enc_depth < 0 || dec_depth < 0)
    throw ConfigError("model: non-positive dimensions");
  if (enc_heads <= 0 || dec_heads <= 0)
    throw ConfigError("model: head counts must be positive");
  if (enc_dim % enc_heads != 0 || dec_dim % dec_heads != 0)
    throw ConfigError("model: width must be divisible by head count");
  if (enc_dim % 4 != 0 || dec_dim % 4 != 0)
    throw ConfigError("model: widths must be divisible by 4 for the position tables");
}

Mat& ParamStore::at(const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw InternalError("param not found: " + name);
  return it->second;
}

const Mat& ParamStore::at(const std::string& name) const {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw InternalError("param not found: " + name);
  return it->second;
}

long long ParamStore::total_count() const {
  long long n = 0;
  for (const auto& [k, v] : tensors) n += static_cast<long long>(v.size());
  return n;
}

namespace {

Mat randn(rng::Stream& rs, int r, int c, double scale) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = scale * rs.normal();
  return m;
}

void init_attention(ParamStore& p, rng::Stream& rs, const std::string& prefix, int dim) {
  for (const char* w : {"wq", "wk", "wv", "wo"})
    p.tensors[prefix + "." + w] = randn(rs, dim, dim, 0.02);
  for (const char* b : {"bq", "bk", "bv", "bo"})
    p.tensors[prefix + "." + b] = Mat::Zero(1, dim);
}

void init_ln(ParamStore& p, const std::string& prefix, int dim) {
  p.tensors[prefix + ".gamma"] = Mat::Ones(1, dim);
  p.tensors[prefix + ".beta"] = Mat::Zero(1, dim);
}

void init_mlp(ParamStore& p, rng::Stream& rs, const std::string& prefix, int dim) {
  p.tensors[prefix + ".w1"] = randn(rs, dim, 4 * dim, 0.02);
  p.tensors[prefix + ".b1"] = Mat::Zero(1, 4 * dim);
  p.tensors[prefix + ".w2"] = randn(rs, 4 * dim, dim, 0.02);
  p.tensors[prefix + ".b2"] = Mat::Zero(1, dim);
}

}  // namespace

ParamStore init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  rng::Stream rs = rng::derive(seed, "init");
  ParamStore p;
  const int pd = cfg.patch_dim();
  for (Modality m : {Modality::sat, Modality::uav}) {
    const std::string mn = mod_name(m);
    p.tensors["proj." + mn] = randn(rs, pd, cfg.enc_dim, 0.02);
    p.tensors["proj." + mn + ".bias"] = Mat::Zero(1, cfg.enc_dim);
  }
  for (int i = 0; i < cfg.enc_depth; ++i) {
    const std::string b = "enc.block" + std::to_string(i);
    init_ln(p, b + ".ln1", cfg.enc_dim);
    init_attention(p, rs, b + ".attn", cfg.enc_dim);
    init_ln(p, b + ".ln2", cfg.enc_dim);
    init_mlp(p, rs, b + ".mlp", cfg.enc_dim);
  }
  for (Modality m : {Modality::sat, Modality::uav}) {
    const std::string d = std::string("dec.") + mod_name(m);
    p.tensors[d + ".embed.w"] = randn(rs, cfg.enc_dim, cfg.dec_dim, 0.02);
    p.tensors[d + ".embed.b"] = Mat::Zero(1, cfg.dec_dim);
    p.tensors[d + ".mask_token"] = randn(rs, 1, cfg.dec_dim, 0.02);
    for (int i = 0; i < cfg.dec_depth; ++i) {
      const std::string b = d + ".block" + std::to_string(i);
      init_ln(p, b + ".lnq", cfg.dec_dim);
      init_attention(p, rs, b + ".cross", cfg.dec_dim);
      init_ln(p, b + ".lns", cfg.dec_dim);
      init_attention(p, rs, b + ".self", cfg.dec_dim);
      init_ln(p, b + ".lnm", cfg.dec_dim);
      init_mlp(p, rs, b + ".mlp", cfg.dec_dim);
    }
    init_ln(p, d + ".norm", cfg.dec_dim);
    p.tensors[d + ".head.w"] = Mat::Zero(cfg.dec_dim, pd);
    p.tensors[d + ".head.b"] = Mat::Zero(1, pd);
  }
  return p;
}

long long count_params(const ModelConfig& cfg) {
  const long long d = cfg.enc_dim, w = cfg.dec_dim, pd = cfg.patch_dim();
  const auto attn = [](long long dim) { return 4 * (dim * dim + dim); };
  const auto mlpn = [](long long dim) {
    return dim * 4 * dim + 4 * dim + 4 * dim * dim + dim;
  };
  const auto lnn = [](long long dim) { return 2 * dim; };
  long long n = 2 * (pd * d + d);                         // projections
  n += cfg.enc_depth * (2 * lnn(d) + attn(d) + mlpn(d));  // encoder blocks
  long long dec_one = d * w + w;                          // embed
  dec_one += w;                                           // mask token
  dec_one += cfg.dec_depth * (3 * lnn(w) + 2 * attn(w) + mlpn(w));
  dec_one += lnn(w);                                      // final norm
  dec_one += w * pd + pd;                                 // head
  n += 2 * dec_one;
  return n;
}

ad::Var encode_tokens(ad::Tape& tape, ad::Var tokens, const ParamStore& params,
                      const ModelConfig& cfg, bool train) {
  Binder p{tape, params, train, {}};
  return encode_impl(tape, p, tokens, cfg);
}

ad::Var decode_modality(ad::Tape& tape, ad::Var latents, const masking::MaskPlan& plan,
                        Modality modality, const ParamStore& params,
                        const ModelConfig& cfg, bool train) {
  Binder p{tape, params, train, {}};
  return decode_impl(tape, p, latents, plan, modality, cfg);
}

LossReport combine_losses(double sat_mse, int masked_sat, double uav_mse,
                          int masked_uav) {
  LossReport r;
  r.masked_sat = masked_sat;
  r.masked_uav = masked_uav;
  r.sat = masked_sat > 0 ? sat_mse : 0.0;
  r.uav = masked_uav > 0 ? uav_mse : 0.0;
  int active = 0;
  double sum = 0.0;
  if (masked_sat > 0) {
    sum += r.sat;
    ++active;
  }
  if (masked_uav > 0) {
    sum += r.uav;
    ++active;
  }
  if (active == 0)
    throw NumericError("loss: no masked tokens in either modality (degenerate batch)");
  r.total = sum / active;
  return r;
}

ForwardResult forward(const SamplePatches& patches, const masking::MaskPlan& plan,
                      const ParamStore& params, const ModelConfig& cfg,
                      const ForwardOptions& opts) {
  cfg.validate();
  const int tokens = cfg.tokens_per_modality();
  if (patches.sat.rows() != tokens || patches.uav.rows() != tokens ||
      patches.sat.cols() != cfg.patch_dim() || patches.uav.cols() != cfg.patch_dim())
    throw InputError("forward: patch matrices do not match model geometry");

  const bool train = opts.grads != nullptr;
  ad::Tape tape;
  Binder p{tape, params, train, {}};
  const Mat pos = tokenizer::sincos_position_table(cfg.geometry().grid(), cfg.enc_dim);

  auto embed_visible = [&](const Mat& patch_mat, Modality m,
                           const std::vector<int>& visible) -> ad::Var {
    const std::string mn = mod_name(m);
    // Project only the visible rows; positions come from the shared table.
    Mat visible_patches(static_cast<Eigen::Index>(visible.size()), patch_mat.cols());
    Mat visible_pos(static_cast<Eigen::Index>(visible.size()), cfg.enc_dim);
    for (size_t i = 0; i < visible.size(); ++i) {
      visible_patches.row(static_cast<Eigen::Index>(i)) = patch_mat.row(visible[i]);
      visible_pos.row(static_cast<Eigen::Index>(i)) = pos.row(visible[i]);
    }
    const ad::Var raw = tape.constant(std::move(visible_patches));
    ad::Var t =
        tape.add_rowvec(tape.matmul(raw, p("proj." + mn)), p("proj." + mn + ".bias"));
    return tape.add_const(t, visible_pos);
  };

  std::vector<ad::Var> parts;
  if (!plan.visible_sat.empty())
    parts.push_back(embed_visible(patches.sat, Modality::sat, plan.visible_sat));
  if (!plan.visible_uav.empty())
    parts.push_back(embed_visible(patches.uav, Modality::uav, plan.visible_uav));
  if (parts.empty())
    throw InputError("forward: at least one visible token is required");
  const ad::Var encoder_in = parts.size() == 1 ? parts[0] : tape.concat_rows(parts);
  const ad::Var latents = encode_impl(tape, p, encoder_in, cfg);

  const ad::Var pred_sat = decode_impl(tape, p, latents, plan, Modality::sat, cfg);
  const ad::Var pred_uav = decode_impl(tape, p, latents, plan, Modality::uav, cfg);

  ForwardResult result;
  if (opts.want_predictions) {
    result.pred_sat = tape.val(pred_sat);
    result.pred_uav = tape.val(pred_uav);
  }

  if (opts.want_loss) {
    const std::vector<int> masked_sat = masking::masked_indices(plan.visible_sat, tokens);
    const std::vector<int> masked_uav = masking::masked_indices(plan.visible_uav, tokens);
    std::vector<ad::Var> losses;
    double sat_mse = 0.0, uav_mse = 0.0;
    if (!masked_sat.empty()) {
      const ad::Var l = tape.masked_mse(pred_sat, patches.sat, masked_sat);
      sat_mse = tape.val(l)(0, 0);
      losses.push_back(l);
    }
    if (!masked_uav.empty()) {
      const ad::Var l = tape.masked_mse(pred_uav, patches.uav, masked_uav);
      uav_mse = tape.val(l)(0, 0);
      losses.push_back(l);
    }
    result.loss = combine_losses(sat_mse, static_cast<int>(masked_sat.size()), uav_mse,
                                 static_cast<int>(masked_uav.size()));
    if (train) {
      const ad::Var total = tape.mean_of(losses);
      tape.backward(total);
      for (const auto& [name, var] : p.bound) {
        const Mat& grad = tape.grad(var);
        auto it = opts.grads->find(name);
        if (grad.size() == 0) {
          if (it == opts.grads->end())
            (*opts.grads)[name] =
                Mat::Zero(params.at(name).rows(), params.at(name).cols());
          continue;
        }
        if (it == opts.grads->end())
          (*opts.grads)[name] = grad;
        else
          it->second += grad;
      }
    }
  }
  return result;
}

}  // namespace crossmae::model
