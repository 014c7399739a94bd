#include "kintools/debias.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "kintools/rng.hpp"

namespace kintools {

namespace {

std::vector<double> softmax(std::vector<double> logits) {
  double peak = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double& v : logits) {
    v = std::exp(v - peak);
    sum += v;
  }
  for (double& v : logits) v /= sum;
  return logits;
}

// y = W x + b with W stored row-major (rows x cols).
std::vector<double> affine(const std::vector<double>& w, const std::vector<double>& b,
                           const std::vector<double>& x) {
  std::vector<double> y(b);
  for (std::size_t r = 0; r < b.size(); ++r) {
    const double* row = w.data() + r * x.size();
    double s = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) s += row[c] * x[c];
    y[r] += s;
  }
  return y;
}

void check_batch(const DebiasModel& m, const std::vector<LabeledFeature>& batch) {
  if (batch.empty()) throw Error(Errc::EmptySet, "empty batch");
  for (const auto& s : batch) {
    if (s.x.size() != m.in_dim) throw Error(Errc::DimensionMismatch, "sample dimension mismatch");
    if (s.y_id < 0 || static_cast<std::size_t>(s.y_id) >= m.num_ids)
      throw Error(Errc::LengthMismatch, "identity class out of range");
    if (s.y_att < 0 || static_cast<std::size_t>(s.y_att) >= m.num_atts)
      throw Error(Errc::LengthMismatch, "attribute class out of range");
  }
}

}  // namespace

DebiasForward debias_forward(const DebiasModel& model, const std::vector<double>& x) {
  if (x.size() != model.in_dim)
    throw Error(Errc::DimensionMismatch, "input dimension " + std::to_string(x.size()) +
                                             ", model expects " + std::to_string(model.in_dim));
  DebiasForward out;
  out.f_deb = affine(model.w_map, model.b_map, x);
  for (double& v : out.f_deb) v = std::tanh(v);
  out.id_probs = softmax(affine(model.w_id, model.b_id, out.f_deb));
  out.att_probs = softmax(affine(model.w_att, model.b_att, out.f_deb));
  return out;
}

DebiasLosses debias_losses(const DebiasModel& model, const std::vector<LabeledFeature>& batch) {
  check_batch(model, batch);
  DebiasLosses losses;
  for (const auto& s : batch) {
    DebiasForward f = debias_forward(model, s.x);
    losses.id_loss -= std::log(std::max(f.id_probs[s.y_id], 1e-300));
    losses.att_loss -= std::log(std::max(f.att_probs[s.y_att], 1e-300));
  }
  double n = static_cast<double>(batch.size());
  losses.id_loss /= n;
  losses.att_loss /= n;
  losses.total = losses.id_loss + losses.att_loss;
  losses.mapping_objective = losses.id_loss - model.lambda * losses.att_loss;
  return losses;
}

DebiasGradients debias_backward(const DebiasModel& model, const std::vector<LabeledFeature>& batch) {
  check_batch(model, batch);
  DebiasGradients g;
  g.w_map.assign(model.w_map.size(), 0.0);
  g.b_map.assign(model.b_map.size(), 0.0);
  g.w_id.assign(model.w_id.size(), 0.0);
  g.b_id.assign(model.b_id.size(), 0.0);
  g.w_att.assign(model.w_att.size(), 0.0);
  g.b_att.assign(model.b_att.size(), 0.0);

  double inv_n = 1.0 / static_cast<double>(batch.size());
  std::vector<double> df_id(model.out_dim), df_att(model.out_dim), du(model.out_dim);
  for (const auto& s : batch) {
    DebiasForward f = debias_forward(model, s.x);

    // Head deltas: dL/dlogit = p - onehot(y), for each head's own loss.
    std::fill(df_id.begin(), df_id.end(), 0.0);
    for (std::size_t r = 0; r < model.num_ids; ++r) {
      double delta = (f.id_probs[r] - (static_cast<std::size_t>(s.y_id) == r ? 1.0 : 0.0)) * inv_n;
      g.b_id[r] += delta;
      for (std::size_t c = 0; c < model.out_dim; ++c) {
        g.w_id[r * model.out_dim + c] += delta * f.f_deb[c];
        df_id[c] += delta * model.w_id[r * model.out_dim + c];
      }
    }
    std::fill(df_att.begin(), df_att.end(), 0.0);
    for (std::size_t r = 0; r < model.num_atts; ++r) {
      double delta = (f.att_probs[r] - (static_cast<std::size_t>(s.y_att) == r ? 1.0 : 0.0)) * inv_n;
      g.b_att[r] += delta;
      for (std::size_t c = 0; c < model.out_dim; ++c) {
        g.w_att[r * model.out_dim + c] += delta * f.f_deb[c];
        df_att[c] += delta * model.w_att[r * model.out_dim + c];
      }
    }

    // Reversal happens here: identity pulls the mapping, attribute pushes.
    for (std::size_t c = 0; c < model.out_dim; ++c) {
      double upstream = df_id[c] - model.lambda * df_att[c];
      du[c] = upstream * (1.0 - f.f_deb[c] * f.f_deb[c]);  // tanh'
      g.b_map[c] += du[c];
    }
    for (std::size_t r = 0; r < model.out_dim; ++r)
      for (std::size_t c = 0; c < model.in_dim; ++c)
        g.w_map[r * model.in_dim + c] += du[r] * s.x[c];
  }
  return g;
}

namespace {

std::vector<double> seeded_init(Rng& rng, std::size_t count, std::size_t fan_in) {
  double scale = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(fan_in, 1)));
  std::vector<double> w(count);
  for (double& v : w) v = rng.uniform(-scale, scale);
  return w;
}

DebiasModel init_model(std::size_t in_dim, std::size_t num_ids, std::size_t num_atts, double lambda,
                       std::uint64_t seed) {
  DebiasModel m;
  m.in_dim = in_dim;
  m.out_dim = in_dim / 2;
  m.num_ids = num_ids;
  m.num_atts = num_atts;
  m.lambda = lambda;
  Rng rng(seed);
  m.w_map = seeded_init(rng, m.out_dim * m.in_dim, m.in_dim);
  m.b_map.assign(m.out_dim, 0.0);
  m.w_id = seeded_init(rng, m.num_ids * m.out_dim, m.out_dim);
  m.b_id.assign(m.num_ids, 0.0);
  m.w_att = seeded_init(rng, m.num_atts * m.out_dim, m.out_dim);
  m.b_att.assign(m.num_atts, 0.0);
  return m;
}

void apply_update(std::vector<double>& param, const std::vector<double>& grad, double lr) {
  for (std::size_t i = 0; i < param.size(); ++i) param[i] -= lr * grad[i];
}

}  // namespace

DebiasTrainResult train_debias(const std::vector<LabeledFeature>& data,
                               const DebiasTrainOptions& opts) {
  if (data.empty()) throw Error(Errc::EmptyDataset, "no training features");
  if (opts.epochs < 0 || !(opts.lr > 0.0) || opts.batch_size == 0 || opts.lambda < 0.0)
    throw Error(Errc::InvalidHyperparameters, "epochs >= 0, lr > 0, batch_size >= 1, lambda >= 0");
  std::size_t in_dim = data.front().x.size();
  if (in_dim < 2) throw Error(Errc::InvalidHyperparameters, "input dimension must be >= 2");
  int num_ids = 0, num_atts = 0;
  for (const auto& s : data) {
    if (s.x.size() != in_dim) throw Error(Errc::DimensionMismatch, "feature dimensions differ");
    if (s.y_id < 0 || s.y_att < 0) throw Error(Errc::LengthMismatch, "negative class index");
    num_ids = std::max(num_ids, s.y_id + 1);
    num_atts = std::max(num_atts, s.y_att + 1);
  }

  DebiasTrainResult result;
  result.model = init_model(in_dim, static_cast<std::size_t>(num_ids),
                            static_cast<std::size_t>(num_atts), opts.lambda, opts.seed);

  Rng rng(opts.seed + 1);
  std::vector<std::size_t> perm(data.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(perm);
    for (std::size_t start = 0; start < perm.size(); start += opts.batch_size) {
      std::size_t stop = std::min(perm.size(), start + opts.batch_size);
      std::vector<LabeledFeature> rows;
      rows.reserve(stop - start);
      for (std::size_t i = start; i < stop; ++i) rows.push_back(data[perm[i]]);
      DebiasGradients g = debias_backward(result.model, rows);
      apply_update(result.model.w_map, g.w_map, opts.lr);
      apply_update(result.model.b_map, g.b_map, opts.lr);
      apply_update(result.model.w_id, g.w_id, opts.lr);
      apply_update(result.model.b_id, g.b_id, opts.lr);
      apply_update(result.model.w_att, g.w_att, opts.lr);
      apply_update(result.model.b_att, g.b_att, opts.lr);
    }
    DebiasLosses l = debias_losses(result.model, data);
    if (!std::isfinite(l.id_loss) || !std::isfinite(l.att_loss))
      throw Error(Errc::NonFinite, "training loss diverged at epoch " + std::to_string(epoch));
    result.id_loss_per_epoch.push_back(l.id_loss);
    result.att_loss_per_epoch.push_back(l.att_loss);
  }
  return result;
}

std::vector<double> debias_apply(const DebiasModel& model, const std::vector<double>& x) {
  return debias_forward(model, x).f_deb;
}

void save_checkpoint(const DebiasModel& model, std::ostream& out) {
  nlohmann::ordered_json doc;
  doc["in_dim"] = model.in_dim;
  doc["out_dim"] = model.out_dim;
  doc["num_ids"] = model.num_ids;
  doc["num_atts"] = model.num_atts;
  doc["lambda"] = model.lambda;
  doc["w_map"] = model.w_map;
  doc["b_map"] = model.b_map;
  doc["w_id"] = model.w_id;
  doc["b_id"] = model.b_id;
  doc["w_att"] = model.w_att;
  doc["b_att"] = model.b_att;
  out << doc.dump(2) << '\n';
}

DebiasModel load_checkpoint(std::istream& in) {
  nlohmann::json doc;
  try {
    in >> doc;
    DebiasModel m;
    m.in_dim = doc.at("in_dim").get<std::size_t>();
    m.out_dim = doc.at("out_dim").get<std::size_t>();
    m.num_ids = doc.at("num_ids").get<std::size_t>();
    m.num_atts = doc.at("num_atts").get<std::size_t>();
    m.lambda = doc.at("lambda").get<double>();
    m.w_map = doc.at("w_map").get<std::vector<double>>();
    m.b_map = doc.at("b_map").get<std::vector<double>>();
    m.w_id = doc.at("w_id").get<std::vector<double>>();
    m.b_id = doc.at("b_id").get<std::vector<double>>();
    m.w_att = doc.at("w_att").get<std::vector<double>>();
    m.b_att = doc.at("b_att").get<std::vector<double>>();
    if (m.w_map.size() != m.out_dim * m.in_dim || m.b_map.size() != m.out_dim ||
        m.w_id.size() != m.num_ids * m.out_dim || m.b_id.size() != m.num_ids ||
        m.w_att.size() != m.num_atts * m.out_dim || m.b_att.size() != m.num_atts)
      throw Error(Errc::ParseError, "checkpoint shapes do not match metadata");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ParseError, std::string("checkpoint: ") + e.what());
  }
}

// --- MLP leakage probe ---

namespace {

/// Plain feed-forward ReLU network with a softmax output, trained by
/// minibatch gradient descent. Dropout masks are drawn per batch when
/// enabled; evaluation never applies dropout.
class Mlp {
 public:
  Mlp(std::size_t in_dim, const std::vector<std::size_t>& hidden, std::size_t classes,
      std::uint64_t seed)
      : rng_(seed) {
    std::vector<std::size_t> dims;
    dims.push_back(in_dim);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(classes);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      weights_.push_back(seeded_init(rng_, dims[l + 1] * dims[l], dims[l]));
      biases_.emplace_back(dims[l + 1], 0.0);
      in_dims_.push_back(dims[l]);
      out_dims_.push_back(dims[l + 1]);
    }
  }

  void train(const std::vector<std::vector<double>>& x, const std::vector<int>& y, int epochs,
             double lr, std::size_t batch_size, double dropout) {
    std::vector<std::size_t> perm(x.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (int epoch = 0; epoch < epochs; ++epoch) {
      rng_.shuffle(perm);
      for (std::size_t start = 0; start < perm.size(); start += batch_size) {
        std::size_t stop = std::min(perm.size(), start + batch_size);
        step(x, y, perm, start, stop, lr, dropout);
      }
    }
  }

  int predict(const std::vector<double>& x) const {
    std::vector<double> a = x;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      a = affine(weights_[l], biases_[l], a);
      if (l + 1 < weights_.size())
        for (double& v : a) v = std::max(0.0, v);
    }
    return static_cast<int>(std::max_element(a.begin(), a.end()) - a.begin());
  }

 private:
  void step(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
            const std::vector<std::size_t>& perm, std::size_t start, std::size_t stop, double lr,
            double dropout) {
    std::size_t layers = weights_.size();
    std::vector<std::vector<double>> gw(layers), gb(layers);
    for (std::size_t l = 0; l < layers; ++l) {
      gw[l].assign(weights_[l].size(), 0.0);
      gb[l].assign(biases_[l].size(), 0.0);
    }
    double inv_n = 1.0 / static_cast<double>(stop - start);

    // One dropout mask per hidden layer per batch; keeps draws cheap and
    // the whole pass deterministic under the seed.
    std::vector<std::vector<double>> keep(layers);
    for (std::size_t l = 0; l + 1 < layers; ++l) {
      keep[l].assign(out_dims_[l], 1.0);
      if (dropout > 0.0) {
        for (double& v : keep[l])
          v = rng_.uniform() < dropout ? 0.0 : 1.0 / (1.0 - dropout);
      }
    }

    std::vector<std::vector<double>> acts(layers + 1);
    for (std::size_t i = start; i < stop; ++i) {
      acts[0] = x[perm[i]];
      for (std::size_t l = 0; l < layers; ++l) {
        acts[l + 1] = affine(weights_[l], biases_[l], acts[l]);
        if (l + 1 < layers) {
          for (std::size_t j = 0; j < acts[l + 1].size(); ++j) {
            acts[l + 1][j] = std::max(0.0, acts[l + 1][j]) * keep[l][j];
          }
        }
      }
      std::vector<double> delta = softmax(acts[layers]);
      delta[y[perm[i]]] -= 1.0;
      for (double& v : delta) v *= inv_n;

      for (std::size_t l = layers; l-- > 0;) {
        for (std::size_t r = 0; r < out_dims_[l]; ++r) {
          gb[l][r] += delta[r];
          const std::vector<double>& input = acts[l];
          for (std::size_t c = 0; c < in_dims_[l]; ++c)
            gw[l][r * in_dims_[l] + c] += delta[r] * input[c];
        }
        if (l == 0) break;
        std::vector<double> next(in_dims_[l], 0.0);
        for (std::size_t r = 0; r < out_dims_[l]; ++r)
          for (std::size_t c = 0; c < in_dims_[l]; ++c)
            next[c] += delta[r] * weights_[l][r * in_dims_[l] + c];
        // ReLU and dropout pass-through
        for (std::size_t c = 0; c < in_dims_[l]; ++c)
          next[c] = acts[l][c] > 0.0 ? next[c] * keep[l - 1][c] : 0.0;
        delta = std::move(next);
      }
    }
    for (std::size_t l = 0; l < layers; ++l) {
      apply_update(weights_[l], gw[l], lr);
      apply_update(biases_[l], gb[l], lr);
    }
  }

  Rng rng_;
  std::vector<std::vector<double>> weights_, biases_;
  std::vector<std::size_t> in_dims_, out_dims_;
};

}  // namespace

ProbeResult leakage_probe(const std::vector<std::vector<double>>& features,
                          const std::vector<int>& labels, int folds, const ProbeOptions& opts) {
  if (features.empty()) throw Error(Errc::EmptyDataset, "no probe features");
  if (features.size() != labels.size())
    throw Error(Errc::LengthMismatch, "features and labels differ in length");
  if (folds < 2 || static_cast<std::size_t>(folds) > features.size())
    throw Error(Errc::InvalidFoldCount, "need 2 <= folds <= n");
  int num_classes = 0;
  for (int y : labels) {
    if (y < 0) throw Error(Errc::LengthMismatch, "negative class label");
    num_classes = std::max(num_classes, y + 1);
  }
  std::size_t dim = features.front().size();
  for (const auto& f : features)
    if (f.size() != dim) throw Error(Errc::DimensionMismatch, "probe feature dimensions differ");

  // Deterministic fold split: shuffle indices once, deal round-robin.
  Rng rng(opts.seed);
  std::vector<std::size_t> perm(features.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  std::vector<int> fold_of(features.size());
  for (std::size_t i = 0; i < perm.size(); ++i) fold_of[perm[i]] = static_cast<int>(i % folds);

  ProbeResult result;
  result.confusion.assign(num_classes, std::vector<std::size_t>(num_classes, 0));
  for (int f = 0; f < folds; ++f) {
    std::vector<std::vector<double>> train_x;
    std::vector<int> train_y;
    std::vector<std::size_t> test_idx;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (fold_of[i] == f)
        test_idx.push_back(i);
      else {
        train_x.push_back(features[i]);
        train_y.push_back(labels[i]);
      }
    }
    Mlp probe(dim, opts.layers, static_cast<std::size_t>(num_classes), opts.seed + 17 * (f + 1));
    probe.train(train_x, train_y, opts.epochs, opts.lr, opts.batch_size, opts.dropout);
    std::size_t correct = 0;
    for (std::size_t i : test_idx) {
      int y_hat = probe.predict(features[i]);
      result.confusion[labels[i]][y_hat]++;
      if (y_hat == labels[i]) ++correct;
    }
    result.fold_accuracy.push_back(static_cast<double>(correct) /
                                   static_cast<double>(test_idx.size()));
  }
  double sum = 0.0;
  for (double a : result.fold_accuracy) sum += a;
  result.accuracy = sum / static_cast<double>(folds);
  return result;
}

}  // namespace kintools
