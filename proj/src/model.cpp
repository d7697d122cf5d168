#include "contrasum/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <variant>

#include "json.hpp"

#include "contrasum/errors.hpp"
#include "contrasum/fsio.hpp"
#include "contrasum/rng.hpp"

namespace contrasum::s2s {

using nlohmann::json;

std::string to_string(Precision p) { return p == Precision::kF32 ? "F32" : "F64"; }

Precision precision_from_string(const std::string& s) {
  if (s == "F32") return Precision::kF32;
  if (s == "F64") return Precision::kF64;
  throw ValidationError("precision", "unknown precision '" + s + "'");
}

void ModelConfig::validate() const {
  if (d_model <= 0) throw ValidationError("d_model", "must be positive");
  if (n_heads <= 0) throw ValidationError("n_heads", "must be positive");
  if (d_model % n_heads != 0) throw ValidationError("d_model", "must be divisible by n_heads");
  if (n_enc_layers <= 0) throw ValidationError("n_enc_layers", "must be positive");
  if (n_dec_layers <= 0) throw ValidationError("n_dec_layers", "must be positive");
  if (d_ff <= 0) throw ValidationError("d_ff", "must be positive");
  if (max_seq_len <= 1) throw ValidationError("max_seq_len", "must exceed 1");
  if (vocab_size < 5) throw ValidationError("vocab_size", "must cover the reserved tokens");
}

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kGeluK = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC = 0.044715;

// ---------------------------------------------------------------------------
// small dense kernels, row-major
// ---------------------------------------------------------------------------

template <typename T>
void matmul_ab(const T* a, const T* b, T* c, int m, int k, int n) {
  // c[m,n] = a[m,k] b[k,n]
  std::fill(c, c + static_cast<std::size_t>(m) * n, T(0));
  for (int i = 0; i < m; ++i) {
    const T* ai = a + static_cast<std::size_t>(i) * k;
    T* ci = c + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const T av = ai[p];
      const T* bp = b + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += av * bp[j];
    }
  }
}

template <typename T>
void matmul_abt_acc(const T* a, const T* b, T* c, int m, int k, int n) {
  // c[m,n] += a[m,k] b[n,k]^T
  for (int i = 0; i < m; ++i) {
    const T* ai = a + static_cast<std::size_t>(i) * k;
    T* ci = c + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const T* bj = b + static_cast<std::size_t>(j) * k;
      T acc = T(0);
      for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
      ci[j] += acc;
    }
  }
}

template <typename T>
void matmul_atb_accd(const T* a, const T* b, double* c, int m, int k, int n) {
  // c[k,n] += a[m,k]^T b[m,n], accumulated in double (parameter gradients)
  for (int i = 0; i < m; ++i) {
    const T* ai = a + static_cast<std::size_t>(i) * k;
    const T* bi = b + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const double av = static_cast<double>(ai[p]);
      double* cp = c + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) cp[j] += av * static_cast<double>(bi[j]);
    }
  }
}

template <typename T>
void add_bias_rows(T* x, const T* bias, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    T* xi = x + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) xi[j] += bias[j];
  }
}

template <typename T>
void bias_grad_accd(const T* dy, double* db, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    const T* di = dy + static_cast<std::size_t>(i) * cols;
    for (int j = 0; j < cols; ++j) db[j] += static_cast<double>(di[j]);
  }
}

template <typename T>
void layernorm_forward(const T* x, const T* w, const T* b, T* out, T* mean, T* rstd, int rows,
                       int cols) {
  for (int i = 0; i < rows; ++i) {
    const T* xi = x + static_cast<std::size_t>(i) * cols;
    T* oi = out + static_cast<std::size_t>(i) * cols;
    double m = 0.0;
    for (int j = 0; j < cols; ++j) m += static_cast<double>(xi[j]);
    m /= cols;
    double var = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double d = static_cast<double>(xi[j]) - m;
      var += d * d;
    }
    var /= cols;
    const double rs = 1.0 / std::sqrt(var + kLnEps);
    mean[i] = static_cast<T>(m);
    rstd[i] = static_cast<T>(rs);
    for (int j = 0; j < cols; ++j) {
      const double xhat = (static_cast<double>(xi[j]) - m) * rs;
      oi[j] = static_cast<T>(xhat * static_cast<double>(w[j]) + static_cast<double>(b[j]));
    }
  }
}

template <typename T>
void layernorm_backward(const T* dout, const T* x, const T* w, const T* mean, const T* rstd,
                        T* dx, double* dw, double* db, int rows, int cols) {
  for (int i = 0; i < rows; ++i) {
    const T* doi = dout + static_cast<std::size_t>(i) * cols;
    const T* xi = x + static_cast<std::size_t>(i) * cols;
    T* dxi = dx + static_cast<std::size_t>(i) * cols;
    const double m = static_cast<double>(mean[i]);
    const double rs = static_cast<double>(rstd[i]);

    double sum_dyw = 0.0;
    double sum_dyw_xhat = 0.0;
    for (int j = 0; j < cols; ++j) {
      const double xhat = (static_cast<double>(xi[j]) - m) * rs;
      const double dyw = static_cast<double>(doi[j]) * static_cast<double>(w[j]);
      sum_dyw += dyw;
      sum_dyw_xhat += dyw * xhat;
      dw[j] += static_cast<double>(doi[j]) * xhat;
      db[j] += static_cast<double>(doi[j]);
    }
    sum_dyw /= cols;
    sum_dyw_xhat /= cols;
    for (int j = 0; j < cols; ++j) {
      const double xhat = (static_cast<double>(xi[j]) - m) * rs;
      const double dyw = static_cast<double>(doi[j]) * static_cast<double>(w[j]);
      dxi[j] += static_cast<T>(rs * (dyw - sum_dyw - xhat * sum_dyw_xhat));
    }
  }
}

template <typename T>
void gelu_forward(const T* x, T* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = static_cast<double>(x[i]);
    const double t = std::tanh(kGeluK * (v + kGeluC * v * v * v));
    out[i] = static_cast<T>(0.5 * v * (1.0 + t));
  }
}

template <typename T>
void gelu_backward(const T* x, const T* dout, T* dx, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double v = static_cast<double>(x[i]);
    const double inner = kGeluK * (v + kGeluC * v * v * v);
    const double t = std::tanh(inner);
    const double dinner = kGeluK * (1.0 + 3.0 * kGeluC * v * v);
    const double dgelu = 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dinner;
    dx[i] += static_cast<T>(dgelu * static_cast<double>(dout[i]));
  }
}

// ---------------------------------------------------------------------------
// parameter layout
// ---------------------------------------------------------------------------

struct InternalTensor {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  char init = 'n';  // 'n' normal*0.02, '1' ones, '0' zeros
};

struct AttnOffsets {
  std::size_t ln_w = 0, ln_b = 0, wq = 0, wk = 0, wv = 0, wo = 0;
};

struct MlpOffsets {
  std::size_t ln_w = 0, ln_b = 0, w1 = 0, b1 = 0, w2 = 0, b2 = 0;
};

struct EncLayerOffsets {
  AttnOffsets attn;
  MlpOffsets mlp;
};

struct DecLayerOffsets {
  AttnOffsets self_attn;
  AttnOffsets cross_attn;
  MlpOffsets mlp;
};

struct Layout {
  std::vector<InternalTensor> tensors;
  std::size_t total = 0;
  std::size_t tok_emb = 0, pos_enc = 0, pos_dec = 0;
  std::vector<EncLayerOffsets> enc;
  std::vector<DecLayerOffsets> dec;
  std::size_t enc_lnf_w = 0, enc_lnf_b = 0, dec_lnf_w = 0, dec_lnf_b = 0;

  std::size_t add(const std::string& name, std::size_t size, char init) {
    const std::size_t off = total;
    tensors.push_back({name, off, size, init});
    total += size;
    return off;
  }

  AttnOffsets add_attn(const std::string& prefix, const std::string& ln_name, int d) {
    AttnOffsets a;
    const std::size_t dd = static_cast<std::size_t>(d) * d;
    a.ln_w = add(ln_name + ".w", static_cast<std::size_t>(d), '1');
    a.ln_b = add(ln_name + ".b", static_cast<std::size_t>(d), '0');
    a.wq = add(prefix + ".wq", dd, 'n');
    a.wk = add(prefix + ".wk", dd, 'n');
    a.wv = add(prefix + ".wv", dd, 'n');
    a.wo = add(prefix + ".wo", dd, 'n');
    return a;
  }

  MlpOffsets add_mlp(const std::string& prefix, const std::string& ln_name, int d, int ff) {
    MlpOffsets m;
    m.ln_w = add(ln_name + ".w", static_cast<std::size_t>(d), '1');
    m.ln_b = add(ln_name + ".b", static_cast<std::size_t>(d), '0');
    m.w1 = add(prefix + ".w1", static_cast<std::size_t>(d) * ff, 'n');
    m.b1 = add(prefix + ".b1", static_cast<std::size_t>(ff), '0');
    m.w2 = add(prefix + ".w2", static_cast<std::size_t>(ff) * d, 'n');
    m.b2 = add(prefix + ".b2", static_cast<std::size_t>(d), '0');
    return m;
  }
};

Layout make_layout(const ModelConfig& cfg) {
  Layout lay;
  const int d = cfg.d_model;
  lay.tok_emb = lay.add("tok_emb", static_cast<std::size_t>(cfg.vocab_size) * d, 'n');
  lay.pos_enc = lay.add("pos_enc", static_cast<std::size_t>(cfg.max_seq_len) * d, 'n');
  lay.pos_dec = lay.add("pos_dec", static_cast<std::size_t>(cfg.max_seq_len) * d, 'n');
  for (int i = 0; i < cfg.n_enc_layers; ++i) {
    const std::string p = "enc." + std::to_string(i);
    EncLayerOffsets layer;
    layer.attn = lay.add_attn(p + ".attn", p + ".ln1", d);
    layer.mlp = lay.add_mlp(p + ".mlp", p + ".ln2", d, cfg.d_ff);
    lay.enc.push_back(layer);
  }
  lay.enc_lnf_w = lay.add("enc.ln_f.w", static_cast<std::size_t>(d), '1');
  lay.enc_lnf_b = lay.add("enc.ln_f.b", static_cast<std::size_t>(d), '0');
  for (int i = 0; i < cfg.n_dec_layers; ++i) {
    const std::string p = "dec." + std::to_string(i);
    DecLayerOffsets layer;
    layer.self_attn = lay.add_attn(p + ".self", p + ".ln1", d);
    layer.cross_attn = lay.add_attn(p + ".cross", p + ".ln2", d);
    layer.mlp = lay.add_mlp(p + ".mlp", p + ".ln3", d, cfg.d_ff);
    lay.dec.push_back(layer);
  }
  lay.dec_lnf_w = lay.add("dec.ln_f.w", static_cast<std::size_t>(d), '1');
  lay.dec_lnf_b = lay.add("dec.ln_f.b", static_cast<std::size_t>(d), '0');
  return lay;
}

// ---------------------------------------------------------------------------
// engine
// ---------------------------------------------------------------------------

template <typename T>
struct SublayerActs {
  std::vector<T> ln_out, ln_mean, ln_rstd;
};

template <typename T>
struct AttnActs : SublayerActs<T> {
  std::vector<T> q, k, v;    // [rows, D] (k/v rows = key length)
  std::vector<T> att;        // [H, q_rows, k_rows]
  std::vector<T> ctx;        // [q_rows, D]
  std::vector<T> x_in;       // residual input [q_rows, D]
};

template <typename T>
struct MlpActs : SublayerActs<T> {
  std::vector<T> pre, act;  // [rows, FF]
  std::vector<T> x_in;      // [rows, D]
};

// Distribution arithmetic runs at least in double so ScoredOutput rows stay
// normalized; the long double instantiation keeps extended precision end to
// end (finite-difference verification path).
template <typename T>
using acc_t = std::conditional_t<std::is_same_v<T, long double>, long double, double>;

template <typename T>
struct Workspace {
  using Acc = acc_t<T>;
  // encoder
  std::vector<T> enc_x0;
  std::vector<AttnActs<T>> enc_attn;
  std::vector<MlpActs<T>> enc_mlp;
  std::vector<T> enc_pre_lnf;
  std::vector<T> enc_out, encf_mean, encf_rstd;
  // decoder
  std::vector<T> dec_x0;
  std::vector<AttnActs<T>> dec_self;
  std::vector<AttnActs<T>> dec_cross;
  std::vector<MlpActs<T>> dec_mlp;
  std::vector<T> dec_pre_lnf;
  std::vector<T> dec_out, decf_mean, decf_rstd;
  // output distribution
  std::vector<Acc> logits, logprobs, probs;
  std::vector<int> src_ids, dec_in, labels;
  int src_len = 0, dec_len = 0;
};

template <typename T>
struct Engine {
  ModelConfig cfg;
  Layout layout;
  std::vector<T> params;

  explicit Engine(const ModelConfig& config) : cfg(config), layout(make_layout(config)) {
    params.assign(layout.total, T(0));
    Rng rng(cfg.init_seed);
    for (const InternalTensor& t : layout.tensors) {
      switch (t.init) {
        case 'n':
          for (std::size_t i = 0; i < t.size; ++i) {
            params[t.offset + i] = static_cast<T>(0.02 * rng.normal());
          }
          break;
        case '1':
          for (std::size_t i = 0; i < t.size; ++i) params[t.offset + i] = T(1);
          break;
        default:
          break;
      }
    }
  }

  const T* p(std::size_t off) const { return params.data() + off; }

  int head_dim() const { return cfg.d_model / cfg.n_heads; }

  void check_tokens(std::span<const int> ids, const char* what) const {
    for (int id : ids) {
      if (id < 0 || id >= cfg.vocab_size) {
        throw ContractError(std::string(what) + ": token id " + std::to_string(id) +
                            " outside vocabulary of size " + std::to_string(cfg.vocab_size));
      }
    }
  }

  // ---- forward ----

  void embed(std::span<const int> ids, std::size_t pos_off, std::vector<T>& out) const {
    const int d = cfg.d_model;
    out.assign(ids.size() * static_cast<std::size_t>(d), T(0));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const T* tok = p(layout.tok_emb) + static_cast<std::size_t>(ids[i]) * d;
      const T* pos = p(pos_off) + i * static_cast<std::size_t>(d);
      T* oi = out.data() + i * static_cast<std::size_t>(d);
      for (int j = 0; j < d; ++j) oi[j] = tok[j] + pos[j];
    }
  }

  // Pre-LN attention sublayer; x is updated in place (residual add).
  void attn_forward(std::vector<T>& x, const std::vector<T>* kv_source, const AttnOffsets& off,
                    bool causal, int q_rows, int k_rows, AttnActs<T>& acts) const {
    const int d = cfg.d_model;
    const int h = cfg.n_heads;
    const int hd = head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    acts.x_in = x;
    acts.ln_out.resize(static_cast<std::size_t>(q_rows) * d);
    acts.ln_mean.resize(q_rows);
    acts.ln_rstd.resize(q_rows);
    layernorm_forward(x.data(), p(off.ln_w), p(off.ln_b), acts.ln_out.data(),
                      acts.ln_mean.data(), acts.ln_rstd.data(), q_rows, d);

    const T* kv_in = kv_source ? kv_source->data() : acts.ln_out.data();
    acts.q.resize(static_cast<std::size_t>(q_rows) * d);
    acts.k.resize(static_cast<std::size_t>(k_rows) * d);
    acts.v.resize(static_cast<std::size_t>(k_rows) * d);
    matmul_ab(acts.ln_out.data(), p(off.wq), acts.q.data(), q_rows, d, d);
    matmul_ab(kv_in, p(off.wk), acts.k.data(), k_rows, d, d);
    matmul_ab(kv_in, p(off.wv), acts.v.data(), k_rows, d, d);

    acts.att.assign(static_cast<std::size_t>(h) * q_rows * k_rows, T(0));
    acts.ctx.assign(static_cast<std::size_t>(q_rows) * d, T(0));
    for (int head = 0; head < h; ++head) {
      const int base = head * hd;
      T* att_h = acts.att.data() + static_cast<std::size_t>(head) * q_rows * k_rows;
      for (int i = 0; i < q_rows; ++i) {
        const T* qi = acts.q.data() + static_cast<std::size_t>(i) * d + base;
        T* att_row = att_h + static_cast<std::size_t>(i) * k_rows;
        const int jmax = causal ? i + 1 : k_rows;
        double row_max = -1e30;
        for (int j = 0; j < jmax; ++j) {
          const T* kj = acts.k.data() + static_cast<std::size_t>(j) * d + base;
          double s = 0.0;
          for (int c = 0; c < hd; ++c) s += static_cast<double>(qi[c]) * static_cast<double>(kj[c]);
          s *= scale;
          att_row[j] = static_cast<T>(s);
          row_max = std::max(row_max, s);
        }
        double denom = 0.0;
        for (int j = 0; j < jmax; ++j) {
          const double e = std::exp(static_cast<double>(att_row[j]) - row_max);
          att_row[j] = static_cast<T>(e);
          denom += e;
        }
        const double inv = 1.0 / denom;
        for (int j = 0; j < jmax; ++j) att_row[j] = static_cast<T>(static_cast<double>(att_row[j]) * inv);

        T* ctx_i = acts.ctx.data() + static_cast<std::size_t>(i) * d + base;
        for (int j = 0; j < jmax; ++j) {
          const T a = att_row[j];
          const T* vj = acts.v.data() + static_cast<std::size_t>(j) * d + base;
          for (int c = 0; c < hd; ++c) ctx_i[c] += a * vj[c];
        }
      }
    }

    // residual add of ctx @ Wo
    std::vector<T> proj(static_cast<std::size_t>(q_rows) * d);
    matmul_ab(acts.ctx.data(), p(off.wo), proj.data(), q_rows, d, d);
    for (std::size_t i = 0; i < proj.size(); ++i) x[i] += proj[i];
  }

  void mlp_forward(std::vector<T>& x, const MlpOffsets& off, int rows, MlpActs<T>& acts) const {
    const int d = cfg.d_model;
    const int ff = cfg.d_ff;
    acts.x_in = x;
    acts.ln_out.resize(static_cast<std::size_t>(rows) * d);
    acts.ln_mean.resize(rows);
    acts.ln_rstd.resize(rows);
    layernorm_forward(x.data(), p(off.ln_w), p(off.ln_b), acts.ln_out.data(), acts.ln_mean.data(),
                      acts.ln_rstd.data(), rows, d);
    acts.pre.resize(static_cast<std::size_t>(rows) * ff);
    matmul_ab(acts.ln_out.data(), p(off.w1), acts.pre.data(), rows, d, ff);
    add_bias_rows(acts.pre.data(), p(off.b1), rows, ff);
    acts.act.resize(acts.pre.size());
    gelu_forward(acts.pre.data(), acts.act.data(), acts.pre.size());
    std::vector<T> proj(static_cast<std::size_t>(rows) * d);
    matmul_ab(acts.act.data(), p(off.w2), proj.data(), rows, ff, d);
    add_bias_rows(proj.data(), p(off.b2), rows, d);
    for (std::size_t i = 0; i < proj.size(); ++i) x[i] += proj[i];
  }

  void run_forward(std::span<const int> src, std::span<const int> target, Workspace<T>& ws) const {
    if (static_cast<int>(src.size()) > cfg.max_seq_len) {
      throw LengthError("source length " + std::to_string(src.size()) +
                        " exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    }
    if (static_cast<int>(target.size()) + 1 > cfg.max_seq_len) {
      throw LengthError("target length " + std::to_string(target.size()) +
                        " (+BOS) exceeds max_seq_len " + std::to_string(cfg.max_seq_len));
    }
    if (src.empty()) throw LengthError("source must contain at least one token");
    check_tokens(src, "source");
    check_tokens(target, "target");

    const int d = cfg.d_model;
    const int s_len = static_cast<int>(src.size());
    const int t_len = static_cast<int>(target.size()) + 1;  // BOS framing
    ws.src_len = s_len;
    ws.dec_len = t_len;

    // encoder
    embed(src, layout.pos_enc, ws.enc_x0);
    std::vector<T> x = ws.enc_x0;
    ws.enc_attn.resize(layout.enc.size());
    ws.enc_mlp.resize(layout.enc.size());
    for (std::size_t l = 0; l < layout.enc.size(); ++l) {
      attn_forward(x, nullptr, layout.enc[l].attn, false, s_len, s_len, ws.enc_attn[l]);
      mlp_forward(x, layout.enc[l].mlp, s_len, ws.enc_mlp[l]);
    }
    ws.enc_pre_lnf = x;
    ws.enc_out.resize(x.size());
    ws.encf_mean.resize(s_len);
    ws.encf_rstd.resize(s_len);
    layernorm_forward(x.data(), p(layout.enc_lnf_w), p(layout.enc_lnf_b), ws.enc_out.data(),
                      ws.encf_mean.data(), ws.encf_rstd.data(), s_len, d);

    // decoder (teacher forcing: BOS + target)
    ws.src_ids.assign(src.begin(), src.end());
    ws.dec_in.assign(static_cast<std::size_t>(t_len), kBosId);
    std::copy(target.begin(), target.end(), ws.dec_in.begin() + 1);
    ws.labels.assign(target.begin(), target.end());
    ws.labels.push_back(kEosId);

    embed(ws.dec_in, layout.pos_dec, ws.dec_x0);
    std::vector<T> y = ws.dec_x0;
    ws.dec_self.resize(layout.dec.size());
    ws.dec_cross.resize(layout.dec.size());
    ws.dec_mlp.resize(layout.dec.size());
    for (std::size_t l = 0; l < layout.dec.size(); ++l) {
      attn_forward(y, nullptr, layout.dec[l].self_attn, true, t_len, t_len, ws.dec_self[l]);
      attn_forward(y, &ws.enc_out, layout.dec[l].cross_attn, false, t_len, s_len, ws.dec_cross[l]);
      mlp_forward(y, layout.dec[l].mlp, t_len, ws.dec_mlp[l]);
    }
    ws.dec_pre_lnf = y;
    ws.dec_out.resize(y.size());
    ws.decf_mean.resize(t_len);
    ws.decf_rstd.resize(t_len);
    layernorm_forward(y.data(), p(layout.dec_lnf_w), p(layout.dec_lnf_b), ws.dec_out.data(),
                      ws.decf_mean.data(), ws.decf_rstd.data(), t_len, d);

    // logits = dec_out @ tok_emb^T, softmax normalized at accumulation precision
    using Acc = acc_t<T>;
    const int v = cfg.vocab_size;
    ws.logits.assign(static_cast<std::size_t>(t_len) * v, Acc(0));
    const T* emb = p(layout.tok_emb);
    for (int t = 0; t < t_len; ++t) {
      const T* row = ws.dec_out.data() + static_cast<std::size_t>(t) * d;
      Acc* lt = ws.logits.data() + static_cast<std::size_t>(t) * v;
      for (int tok = 0; tok < v; ++tok) {
        const T* ev = emb + static_cast<std::size_t>(tok) * d;
        T acc = T(0);
        for (int c = 0; c < d; ++c) acc += row[c] * ev[c];
        lt[tok] = static_cast<Acc>(acc);
      }
    }
    ws.logprobs.resize(ws.logits.size());
    ws.probs.resize(ws.logits.size());
    for (int t = 0; t < t_len; ++t) {
      const Acc* lt = ws.logits.data() + static_cast<std::size_t>(t) * v;
      Acc* lp = ws.logprobs.data() + static_cast<std::size_t>(t) * v;
      Acc* pr = ws.probs.data() + static_cast<std::size_t>(t) * v;
      Acc row_max = lt[0];
      for (int tok = 1; tok < v; ++tok) row_max = std::max(row_max, lt[tok]);
      Acc denom = Acc(0);
      for (int tok = 0; tok < v; ++tok) denom += std::exp(lt[tok] - row_max);
      const Acc lse = row_max + std::log(denom);
      for (int tok = 0; tok < v; ++tok) {
        lp[tok] = lt[tok] - lse;
        pr[tok] = std::exp(lp[tok]);
      }
    }
  }

  acc_t<T> mean_cross_entropy(const Workspace<T>& ws) const {
    using Acc = acc_t<T>;
    const int v = cfg.vocab_size;
    Acc sum = Acc(0);
    int active = 0;
    for (std::size_t t = 0; t < ws.labels.size(); ++t) {
      if (ws.labels[t] == kPadId) continue;
      sum -= ws.logprobs[t * static_cast<std::size_t>(v) + static_cast<std::size_t>(ws.labels[t])];
      ++active;
    }
    return active > 0 ? sum / active : Acc(0);
  }

  // ---- backward ----

  // kv_source / d_kv_source are null for self-attention (keys and values come
  // from ln_out) and point at the encoder output (and its grad accumulator)
  // for cross-attention.
  void attn_backward(const AttnActs<T>& acts, const AttnOffsets& off, bool causal, int q_rows,
                     int k_rows, const std::vector<T>& dx_out, std::vector<T>& dx_in,
                     const std::vector<T>* kv_source, std::vector<T>* d_kv_source,
                     std::span<double> grad) const {
    const int d = cfg.d_model;
    const int h = cfg.n_heads;
    const int hd = head_dim();
    const double scale = 1.0 / std::sqrt(static_cast<double>(hd));

    // residual: gradient passes straight through, plus through the sublayer
    dx_in = dx_out;

    // proj = ctx @ Wo
    std::vector<T> dctx(static_cast<std::size_t>(q_rows) * d, T(0));
    matmul_abt_acc(dx_out.data(), p(off.wo), dctx.data(), q_rows, d, d);
    matmul_atb_accd(acts.ctx.data(), dx_out.data(), grad.data() + off.wo, q_rows, d, d);

    std::vector<T> dq(static_cast<std::size_t>(q_rows) * d, T(0));
    std::vector<T> dk(static_cast<std::size_t>(k_rows) * d, T(0));
    std::vector<T> dv(static_cast<std::size_t>(k_rows) * d, T(0));
    std::vector<T> datt_row(static_cast<std::size_t>(k_rows));
    for (int head = 0; head < h; ++head) {
      const int base = head * hd;
      const T* att_h = acts.att.data() + static_cast<std::size_t>(head) * q_rows * k_rows;
      for (int i = 0; i < q_rows; ++i) {
        const int jmax = causal ? i + 1 : k_rows;
        const T* att_row = att_h + static_cast<std::size_t>(i) * k_rows;
        const T* dctx_i = dctx.data() + static_cast<std::size_t>(i) * d + base;

        // d att and d v
        double dot_sum = 0.0;
        for (int j = 0; j < jmax; ++j) {
          const T* vj = acts.v.data() + static_cast<std::size_t>(j) * d + base;
          double da = 0.0;
          for (int c = 0; c < hd; ++c) da += static_cast<double>(dctx_i[c]) * static_cast<double>(vj[c]);
          datt_row[j] = static_cast<T>(da);
          dot_sum += da * static_cast<double>(att_row[j]);
          T* dvj = dv.data() + static_cast<std::size_t>(j) * d + base;
          const T a = att_row[j];
          for (int c = 0; c < hd; ++c) dvj[c] += a * dctx_i[c];
        }
        // softmax backward, then scores -> q, k
        const T* qi = acts.q.data() + static_cast<std::size_t>(i) * d + base;
        T* dqi = dq.data() + static_cast<std::size_t>(i) * d + base;
        for (int j = 0; j < jmax; ++j) {
          const double ds =
              (static_cast<double>(datt_row[j]) - dot_sum) * static_cast<double>(att_row[j]) * scale;
          const T* kj = acts.k.data() + static_cast<std::size_t>(j) * d + base;
          T* dkj = dk.data() + static_cast<std::size_t>(j) * d + base;
          for (int c = 0; c < hd; ++c) {
            dqi[c] += static_cast<T>(ds * static_cast<double>(kj[c]));
            dkj[c] += static_cast<T>(ds * static_cast<double>(qi[c]));
          }
        }
      }
    }

    // back through the projections into ln_out (queries) and the k/v input
    std::vector<T> dln(static_cast<std::size_t>(q_rows) * d, T(0));
    matmul_abt_acc(dq.data(), p(off.wq), dln.data(), q_rows, d, d);
    matmul_atb_accd(acts.ln_out.data(), dq.data(), grad.data() + off.wq, q_rows, d, d);

    const T* kv_acts = kv_source ? kv_source->data() : acts.ln_out.data();
    T* dkv = d_kv_source ? d_kv_source->data() : dln.data();
    matmul_abt_acc(dk.data(), p(off.wk), dkv, k_rows, d, d);
    matmul_abt_acc(dv.data(), p(off.wv), dkv, k_rows, d, d);
    matmul_atb_accd(kv_acts, dk.data(), grad.data() + off.wk, k_rows, d, d);
    matmul_atb_accd(kv_acts, dv.data(), grad.data() + off.wv, k_rows, d, d);

    layernorm_backward(dln.data(), acts.x_in.data(), p(off.ln_w), acts.ln_mean.data(),
                       acts.ln_rstd.data(), dx_in.data(), grad.data() + off.ln_w,
                       grad.data() + off.ln_b, q_rows, d);
  }

  void mlp_backward(const MlpActs<T>& acts, const MlpOffsets& off, int rows,
                    const std::vector<T>& dx_out, std::vector<T>& dx_in,
                    std::span<double> grad) const {
    const int d = cfg.d_model;
    const int ff = cfg.d_ff;
    dx_in = dx_out;

    std::vector<T> dact(static_cast<std::size_t>(rows) * ff, T(0));
    matmul_abt_acc(dx_out.data(), p(off.w2), dact.data(), rows, d, ff);
    matmul_atb_accd(acts.act.data(), dx_out.data(), grad.data() + off.w2, rows, ff, d);
    bias_grad_accd(dx_out.data(), grad.data() + off.b2, rows, d);

    std::vector<T> dpre(static_cast<std::size_t>(rows) * ff, T(0));
    gelu_backward(acts.pre.data(), dact.data(), dpre.data(), dpre.size());

    std::vector<T> dln(static_cast<std::size_t>(rows) * d, T(0));
    matmul_abt_acc(dpre.data(), p(off.w1), dln.data(), rows, ff, d);
    matmul_atb_accd(acts.ln_out.data(), dpre.data(), grad.data() + off.w1, rows, d, ff);
    bias_grad_accd(dpre.data(), grad.data() + off.b1, rows, ff);

    layernorm_backward(dln.data(), acts.x_in.data(), p(off.ln_w), acts.ln_mean.data(),
                       acts.ln_rstd.data(), dx_in.data(), grad.data() + off.ln_w,
                       grad.data() + off.ln_b, rows, d);
  }

  void embed_backward(const std::vector<int>& ids, std::size_t pos_off, const std::vector<T>& dx,
                      std::span<double> grad) const {
    const int d = cfg.d_model;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const T* di = dx.data() + i * static_cast<std::size_t>(d);
      double* gtok = grad.data() + layout.tok_emb + static_cast<std::size_t>(ids[i]) * d;
      double* gpos = grad.data() + pos_off + i * static_cast<std::size_t>(d);
      for (int j = 0; j < d; ++j) {
        gtok[j] += static_cast<double>(di[j]);
        gpos[j] += static_cast<double>(di[j]);
      }
    }
  }

  // Accumulates weight * d(mean CE)/d(params) into grad; returns the mean CE.
  double run_backward(const Workspace<T>& ws, double weight, std::span<double> grad) const {
    const int d = cfg.d_model;
    const int v = cfg.vocab_size;
    const int s_len = ws.src_len;
    const int t_len = ws.dec_len;

    const double ce = static_cast<double>(mean_cross_entropy(ws));
    int active = 0;
    for (int label : ws.labels) {
      if (label != kPadId) ++active;
    }
    if (active == 0 || weight == 0.0) return ce;

    // d logits: weight * (p - onehot) / active on non-PAD rows
    std::vector<T> dlogits(static_cast<std::size_t>(t_len) * v, T(0));
    const double inv_active = weight / static_cast<double>(active);
    for (int t = 0; t < t_len; ++t) {
      const int label = ws.labels[static_cast<std::size_t>(t)];
      if (label == kPadId) continue;
      const auto* pr = ws.probs.data() + static_cast<std::size_t>(t) * v;
      T* dl = dlogits.data() + static_cast<std::size_t>(t) * v;
      for (int tok = 0; tok < v; ++tok) {
        dl[tok] = static_cast<T>(static_cast<double>(pr[tok]) * inv_active);
      }
      dl[label] = static_cast<T>((static_cast<double>(pr[label]) - 1.0) * inv_active);
    }

    // logits = dec_out @ tok_emb^T (tied weights)
    std::vector<T> d_dec_out(static_cast<std::size_t>(t_len) * d, T(0));
    matmul_ab(dlogits.data(), p(layout.tok_emb), d_dec_out.data(), t_len, v, d);
    matmul_atb_accd(dlogits.data(), ws.dec_out.data(), grad.data() + layout.tok_emb, t_len, v, d);

    std::vector<T> dy(static_cast<std::size_t>(t_len) * d, T(0));
    layernorm_backward(d_dec_out.data(), ws.dec_pre_lnf.data(), p(layout.dec_lnf_w),
                       ws.decf_mean.data(), ws.decf_rstd.data(), dy.data(),
                       grad.data() + layout.dec_lnf_w, grad.data() + layout.dec_lnf_b, t_len, d);

    std::vector<T> d_enc_out(static_cast<std::size_t>(s_len) * d, T(0));
    std::vector<T> dy_next;
    for (std::size_t l = layout.dec.size(); l-- > 0;) {
      mlp_backward(ws.dec_mlp[l], layout.dec[l].mlp, t_len, dy, dy_next, grad);
      dy.swap(dy_next);
      attn_backward(ws.dec_cross[l], layout.dec[l].cross_attn, false, t_len, s_len, dy, dy_next,
                    &ws.enc_out, &d_enc_out, grad);
      dy.swap(dy_next);
      attn_backward(ws.dec_self[l], layout.dec[l].self_attn, true, t_len, t_len, dy, dy_next,
                    nullptr, nullptr, grad);
      dy.swap(dy_next);
    }
    embed_backward(ws.dec_in, layout.pos_dec, dy, grad);

    std::vector<T> dxe(static_cast<std::size_t>(s_len) * d, T(0));
    layernorm_backward(d_enc_out.data(), ws.enc_pre_lnf.data(), p(layout.enc_lnf_w),
                       ws.encf_mean.data(), ws.encf_rstd.data(), dxe.data(),
                       grad.data() + layout.enc_lnf_w, grad.data() + layout.enc_lnf_b, s_len, d);
    std::vector<T> dxe_next;
    for (std::size_t l = layout.enc.size(); l-- > 0;) {
      mlp_backward(ws.enc_mlp[l], layout.enc[l].mlp, s_len, dxe, dxe_next, grad);
      dxe.swap(dxe_next);
      attn_backward(ws.enc_attn[l], layout.enc[l].attn, false, s_len, s_len, dxe, dxe_next,
                    nullptr, nullptr, grad);
      dxe.swap(dxe_next);
    }
    embed_backward(ws.src_ids, layout.pos_enc, dxe, grad);
    return ce;
  }
};

}  // namespace

// ---------------------------------------------------------------------------
// TransformerModel
// ---------------------------------------------------------------------------

struct TransformerModel::Impl {
  ModelConfig cfg;
  std::variant<Engine<double>, Engine<float>> engine;
  std::vector<TensorSpec> specs;
  std::unique_ptr<Engine<long double>> shadow;  // lazily built verification replica

  explicit Impl(const ModelConfig& config)
      : cfg(config),
        engine(config.precision == Precision::kF64
                   ? std::variant<Engine<double>, Engine<float>>(std::in_place_type<Engine<double>>,
                                                                 config)
                   : std::variant<Engine<double>, Engine<float>>(std::in_place_type<Engine<float>>,
                                                                 config)) {
    const Layout& lay =
        std::visit([](const auto& e) -> const Layout& { return e.layout; }, engine);
    specs.reserve(lay.tensors.size());
    for (const InternalTensor& t : lay.tensors) specs.push_back({t.name, t.offset, t.size});
  }
};

TransformerModel::TransformerModel(const ModelConfig& config) {
  config.validate();
  impl_ = std::make_unique<Impl>(config);
}

TransformerModel::~TransformerModel() = default;

const ModelConfig& TransformerModel::config() const { return impl_->cfg; }

std::size_t TransformerModel::param_count() const {
  return std::visit([](const auto& e) { return e.params.size(); }, impl_->engine);
}

double TransformerModel::get_param(std::size_t index) const {
  return std::visit([&](const auto& e) { return static_cast<double>(e.params.at(index)); },
                    impl_->engine);
}

void TransformerModel::set_param(std::size_t index, double value) {
  std::visit(
      [&](auto& e) {
        using P = std::remove_reference_t<decltype(e.params[0])>;
        e.params.at(index) = static_cast<P>(value);
      },
      impl_->engine);
}

std::vector<double> TransformerModel::params_f64() const {
  return std::visit(
      [](const auto& e) {
        return std::vector<double>(e.params.begin(), e.params.end());
      },
      impl_->engine);
}

void TransformerModel::set_params_f64(std::span<const double> values) {
  std::visit(
      [&](auto& e) {
        if (values.size() != e.params.size()) {
          throw ContractError("parameter vector size mismatch: expected " +
                              std::to_string(e.params.size()) + ", got " +
                              std::to_string(values.size()));
        }
        using P = std::remove_reference_t<decltype(e.params[0])>;
        for (std::size_t i = 0; i < values.size(); ++i) e.params[i] = static_cast<P>(values[i]);
      },
      impl_->engine);
}

void TransformerModel::apply_param_update(std::span<const double> delta) {
  std::visit(
      [&](auto& e) {
        if (delta.size() != e.params.size()) {
          throw ContractError("update vector size mismatch: expected " +
                              std::to_string(e.params.size()) + ", got " +
                              std::to_string(delta.size()));
        }
        using P = std::remove_reference_t<decltype(e.params[0])>;
        for (std::size_t i = 0; i < delta.size(); ++i) {
          e.params[i] = static_cast<P>(static_cast<double>(e.params[i]) + delta[i]);
        }
      },
      impl_->engine);
}

const std::vector<TensorSpec>& TransformerModel::tensors() const { return impl_->specs; }

ScoredOutput TransformerModel::forward(std::span<const int> src,
                                       std::span<const int> target) const {
  return std::visit(
      [&](const auto& e) {
        using T = std::remove_cv_t<std::remove_reference_t<decltype(e.params[0])>>;
        Workspace<T> ws;
        e.run_forward(src, target, ws);
        ScoredOutput out;
        out.target_length = static_cast<std::size_t>(ws.dec_len);
        out.vocab_size = static_cast<std::size_t>(e.cfg.vocab_size);
        out.logprobs = std::move(ws.logprobs);
        out.target_tokens = std::move(ws.labels);
        return out;
      },
      impl_->engine);
}

double TransformerModel::cross_entropy_backward(std::span<const int> src,
                                                std::span<const int> target, double weight,
                                                std::span<double> grad) const {
  if (grad.size() != param_count()) {
    throw ContractError("gradient buffer size mismatch: expected " +
                        std::to_string(param_count()) + ", got " + std::to_string(grad.size()));
  }
  return std::visit(
      [&](const auto& e) {
        using T = std::remove_cv_t<std::remove_reference_t<decltype(e.params[0])>>;
        Workspace<T> ws;
        e.run_forward(src, target, ws);
        return e.run_backward(ws, weight, grad);
      },
      impl_->engine);
}

long double TransformerModel::cross_entropy_extended(std::span<const int> src,
                                                     std::span<const int> target,
                                                     std::span<const double> params) const {
  if (!impl_->shadow) impl_->shadow = std::make_unique<Engine<long double>>(impl_->cfg);
  Engine<long double>& e = *impl_->shadow;
  if (params.size() != e.params.size()) {
    throw ContractError("cross_entropy_extended: parameter vector size mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    e.params[i] = static_cast<long double>(params[i]);
  }
  Workspace<long double> ws;
  e.run_forward(src, target, ws);
  return e.mean_cross_entropy(ws);
}

std::vector<int> TransformerModel::generate(std::span<const int> src,
                                            std::size_t max_len) const {
  const ModelConfig& cfg = impl_->cfg;
  if (static_cast<int>(max_len) + 1 > cfg.max_seq_len) {
    throw LengthError("max_len " + std::to_string(max_len) + " (+BOS) exceeds max_seq_len " +
                      std::to_string(cfg.max_seq_len));
  }
  std::vector<int> generated;
  while (generated.size() < max_len) {
    const ScoredOutput scored = forward(src, generated);
    const std::size_t last = scored.target_length - 1;
    const double* row = scored.logprobs.data() + last * scored.vocab_size;
    int best = 0;
    for (int tok = 1; tok < static_cast<int>(scored.vocab_size); ++tok) {
      if (row[tok] > row[best]) best = tok;
    }
    if (best == kEosId) break;
    generated.push_back(best);
  }
  return generated;
}

// ---------------------------------------------------------------------------
// checkpointing
// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[9] = "CSUMCKP1";
constexpr int kCheckpointVersion = 1;

static_assert(sizeof(double) == 8);

json config_to_json(const ModelConfig& cfg) {
  return json{{"d_model", cfg.d_model},
              {"n_heads", cfg.n_heads},
              {"n_enc_layers", cfg.n_enc_layers},
              {"n_dec_layers", cfg.n_dec_layers},
              {"d_ff", cfg.d_ff},
              {"max_seq_len", cfg.max_seq_len},
              {"vocab_size", cfg.vocab_size},
              {"init_seed", cfg.init_seed},
              {"precision", to_string(cfg.precision)}};
}

ModelConfig config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.d_model = j.at("d_model").get<int>();
  cfg.n_heads = j.at("n_heads").get<int>();
  cfg.n_enc_layers = j.at("n_enc_layers").get<int>();
  cfg.n_dec_layers = j.at("n_dec_layers").get<int>();
  cfg.d_ff = j.at("d_ff").get<int>();
  cfg.max_seq_len = j.at("max_seq_len").get<int>();
  cfg.vocab_size = j.at("vocab_size").get<int>();
  cfg.init_seed = j.at("init_seed").get<std::uint64_t>();
  cfg.precision = precision_from_string(j.at("precision").get<std::string>());
  return cfg;
}

void append_u64_le(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t read_u64_le(const std::string& data, std::size_t off) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[off + i])) << (8 * i);
  }
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const Seq2SeqModel& model, const Vocabulary& vocab) {
  if (static_cast<int>(vocab.size()) != model.config().vocab_size) {
    throw ContractError("vocabulary size does not match model vocab_size");
  }
  json header;
  header["version"] = kCheckpointVersion;
  header["config"] = config_to_json(model.config());
  header["vocab"] = vocab.tokens();
  json tensors = json::array();
  for (const TensorSpec& t : model.tensors()) {
    tensors.push_back({{"name", t.name}, {"offset", t.offset}, {"size", t.size}});
  }
  header["tensors"] = std::move(tensors);
  header["param_dtype"] = "f64";
  header["param_count"] = model.param_count();

  const std::string header_str = header.dump();
  const std::vector<double> params = model.params_f64();

  std::string blob;
  blob.reserve(16 + header_str.size() + params.size() * 8);
  blob.append(kCheckpointMagic, 8);
  append_u64_le(blob, header_str.size());
  blob.append(header_str);
  for (double value : params) {
    std::uint64_t bits;
    std::memcpy(&bits, &value, 8);
    append_u64_le(blob, bits);
  }
  atomic_write_file(path, blob);
}

Checkpoint load_checkpoint(const std::string& path) {
  const std::string data = read_file(path);
  if (data.size() < 16 || data.compare(0, 8, kCheckpointMagic, 8) != 0) {
    throw SchemaError("not a checkpoint file: " + path);
  }
  const std::uint64_t header_len = read_u64_le(data, 8);
  if (16 + header_len > data.size()) throw SchemaError("truncated checkpoint header: " + path);
  json header;
  try {
    header = json::parse(data.substr(16, header_len));
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("bad checkpoint header: ") + e.what());
  }
  if (!header.contains("version")) throw SchemaError("checkpoint missing version field");
  Checkpoint ckpt;
  std::size_t n = 0;
  try {
    if (header.at("version").get<int>() != kCheckpointVersion) {
      throw SchemaError("unsupported checkpoint version " +
                        std::to_string(header.at("version").get<int>()));
    }
    ckpt.config = config_from_json(header.at("config"));
    ckpt.vocab_tokens = header.at("vocab").get<std::vector<std::string>>();
    n = header.at("param_count").get<std::size_t>();
  } catch (const json::exception& e) {
    throw SchemaError(std::string("bad checkpoint header field: ") + e.what());
  }
  const std::size_t blob_off = 16 + header_len;
  if (blob_off + n * 8 > data.size()) throw SchemaError("truncated checkpoint params: " + path);
  ckpt.params.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t bits = read_u64_le(data, blob_off + i * 8);
    std::memcpy(&ckpt.params[i], &bits, 8);
  }
  return ckpt;
}

std::unique_ptr<TransformerModel> model_from_checkpoint(const Checkpoint& ckpt) {
  auto model = std::make_unique<TransformerModel>(ckpt.config);
  model->set_params_f64(ckpt.params);
  return model;
}

}  // namespace contrasum::s2s
