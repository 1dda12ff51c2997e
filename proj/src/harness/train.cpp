#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "mtvqa/error.hpp"
#include "mtvqa/harness.hpp"

namespace mtvqa::harness {

namespace {

template <class T>
T parse_number(std::string_view key, std::string_view text) {
  T out{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("harness", "bad value for " + std::string(key) + ": '" + std::string(text) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError("harness", "bad value for " + std::string(key) + ": '" + std::string(text) + "'");
}

std::vector<std::size_t> parse_list(std::string_view key, std::string_view text) {
  std::vector<std::size_t> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = std::min(text.find(',', start), text.size());
    out.push_back(parse_number<std::size_t>(key, text.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

struct Snapshot {
  std::vector<ad::Tensor> values;

  static Snapshot of(const models::Model& m) {
    Snapshot s;
    for (const auto& p : m.parameters()) s.values.push_back(p.value);
    return s;
  }
  void restore(models::Model& m) const {
    auto params = m.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i].value = values[i];
  }
};

models::EncodedDataset subset(const models::EncodedDataset& data, const std::vector<std::size_t>& idx) {
  models::EncodedDataset out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(data[i]);
  return out;
}

// Unmasked slots whose answer never appeared in training cannot be learnt;
// they are left out of the loss.
std::vector<std::uint8_t> loss_mask(const models::EncodedExample& ex) {
  std::vector<std::uint8_t> mask(ex.mask);
  for (std::size_t s = 0; s < mask.size(); ++s)
    if (ex.targets[s] < 0) mask[s] = 0;
  return mask;
}

template <class Optimizer>
void run_phase(models::Model& model, Optimizer& opt, Phase phase, std::size_t max_epochs,
               const models::EncodedDataset& train_set, const models::EncodedDataset& monitor_set,
               const corpus::FeatureStore& features, const TrainConfig& cfg, std::mt19937_64& rng,
               TrainHistory& history, double& global_best, Snapshot& global_snapshot) {
  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  double phase_best = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> phase_best_epoch;
  Snapshot phase_snapshot = Snapshot::of(model);
  std::size_t stale = 0;
  ad::Graph g;

  for (std::size_t e = 0; e < max_epochs; ++e) {
    const std::size_t epoch = history.epochs.size() + 1;
    std::shuffle(order.begin(), order.end(), rng);
    double loss_total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      model.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) {
        const auto& ex = train_set[order[k]];
        g.clear();
        const auto logits = model.forward(g, features.at(ex.image_id), ex.questions);
        const auto mask = loss_mask(ex);
        const ad::Var loss = models::multitask_loss(g, logits, ex.targets, mask);
        batch_loss += g.value(loss)[0];
        g.backward(loss, scale);
      }
      batch_loss *= scale;
      ++batches;
      if (!std::isfinite(batch_loss)) {
        throw NumericError("harness", "non-finite loss at epoch " + std::to_string(epoch) + " batch " +
                                          std::to_string(batches) + " (" + std::string(to_string(phase)) + ")");
      }
      loss_total += batch_loss;
      opt.step(model.parameters());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.phase = phase;
    rec.train_loss = batches ? loss_total / static_cast<double>(batches) : 0.0;
    rec.val_loss = mean_loss(model, monitor_set, features);
    rec.val_accuracy = evaluate(model, monitor_set, features).total_accuracy().value_or(0.0);
    if (!std::isfinite(rec.val_loss)) {
      throw NumericError("harness", "non-finite monitored loss after epoch " + std::to_string(epoch));
    }
    history.epochs.push_back(rec);

    if (rec.val_loss < global_best) {
      global_best = rec.val_loss;
      global_snapshot = Snapshot::of(model);
      history.best_epoch = epoch;
    }
    if (rec.val_loss < phase_best - cfg.min_delta || !phase_best_epoch) {
      phase_best = rec.val_loss;
      phase_best_epoch = epoch;
      phase_snapshot = Snapshot::of(model);
      stale = 0;
    } else if (++stale >= cfg.patience) {
      break;
    }
  }
  if (phase_best_epoch) {
    (phase == Phase::Nadam ? history.converged_nadam : history.converged_sgd) = phase_best_epoch;
    phase_snapshot.restore(model);
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (patience < 1) throw ConfigError("harness", "patience must be at least 1");
  if (batch_size < 1) throw ConfigError("harness", "batch_size must be at least 1");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("harness", "validation_fraction must lie strictly between 0 and 1");
  }
  if (!(min_delta >= 0.0)) throw ConfigError("harness", "min_delta must be non-negative");
  if (!(nadam.lr > 0.0) || !(sgd.lr > 0.0)) throw ConfigError("harness", "learning rates must be positive");
}

bool apply_override(TrainConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "batch_size") cfg.batch_size = parse_number<std::size_t>(key, value);
  else if (key == "max_epochs_nadam") cfg.max_epochs_nadam = parse_number<std::size_t>(key, value);
  else if (key == "max_epochs_sgd") cfg.max_epochs_sgd = parse_number<std::size_t>(key, value);
  else if (key == "patience") cfg.patience = parse_number<std::size_t>(key, value);
  else if (key == "min_delta") cfg.min_delta = parse_number<double>(key, value);
  else if (key == "nadam.lr") cfg.nadam.lr = parse_number<double>(key, value);
  else if (key == "nadam.beta1") cfg.nadam.beta1 = parse_number<double>(key, value);
  else if (key == "nadam.beta2") cfg.nadam.beta2 = parse_number<double>(key, value);
  else if (key == "nadam.eps") cfg.nadam.eps = parse_number<double>(key, value);
  else if (key == "sgd.lr") cfg.sgd.lr = parse_number<double>(key, value);
  else if (key == "sgd.momentum") cfg.sgd.momentum = parse_number<double>(key, value);
  else if (key == "seed") cfg.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "validation_fraction") cfg.validation_fraction = parse_number<double>(key, value);
  else if (key == "monitor") {
    if (value == "validation") cfg.monitor = Monitor::Validation;
    else if (value == "training") cfg.monitor = Monitor::Training;
    else throw ConfigError("harness", "monitor must be 'validation' or 'training'");
  } else {
    return false;
  }
  return true;
}

bool apply_override(models::ModelConfig& cfg, std::string_view key, std::string_view value) {
  if (key == "embed_dim") cfg.embed_dim = parse_number<std::size_t>(key, value);
  else if (key == "max_len") cfg.max_len = parse_number<std::size_t>(key, value);
  else if (key == "filter_widths") cfg.filter_widths = parse_list(key, value);
  else if (key == "filters_per_width") cfg.filters_per_width = parse_number<std::size_t>(key, value);
  else if (key == "hidden_width") cfg.hidden_width = parse_number<std::size_t>(key, value);
  else if (key == "image_width") cfg.image_width = parse_number<std::size_t>(key, value);
  else if (key == "share_question_encoder") cfg.share_question_encoder = parse_bool(key, value);
  else if (key == "lstm_layers") cfg.lstm_layers = parse_number<std::size_t>(key, value);
  else if (key == "lstm_width") cfg.lstm_width = parse_number<std::size_t>(key, value);
  else if (key == "common_width") cfg.common_width = parse_number<std::size_t>(key, value);
  else if (key == "classifier_widths") cfg.classifier_widths = parse_list(key, value);
  else return false;
  return true;
}

std::string_view to_string(Phase p) { return p == Phase::Nadam ? "nadam" : "sgd"; }

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_image(const models::EncodedDataset& data,
                                                                              double fraction, std::uint64_t seed) {
  std::set<std::string> unique;
  for (const auto& ex : data) unique.insert(ex.image_id);
  if (unique.size() < 2) throw ConfigError("harness", "a validation split needs examples from at least two images");
  std::vector<std::string> images(unique.begin(), unique.end());
  std::mt19937_64 rng(seed);
  std::shuffle(images.begin(), images.end(), rng);
  auto held = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(images.size()) + 0.5));
  held = std::clamp<std::size_t>(held, 1, images.size() - 1);
  const std::set<std::string> val_images(images.begin(), images.begin() + static_cast<std::ptrdiff_t>(held));
  std::pair<std::vector<std::size_t>, std::vector<std::size_t>> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    (val_images.count(data[i].image_id) ? out.second : out.first).push_back(i);
  }
  return out;
}

TrainHistory train(models::Model& model, const models::EncodedDataset& data, const corpus::FeatureStore& features,
                   const TrainConfig& cfg) {
  cfg.validate();
  if (data.empty()) throw ConfigError("harness", "training data is empty");
  for (const auto& ex : data) {
    if (ex.questions.size() != model.slot_count()) {
      throw ConfigError("harness", "example for " + ex.image_id + " has " + std::to_string(ex.questions.size()) +
                                       " slots, model expects " + std::to_string(model.slot_count()));
    }
  }

  models::EncodedDataset train_set;
  models::EncodedDataset monitor_set;
  if (cfg.monitor == Monitor::Validation) {
    const auto [tr, va] = split_by_image(data, cfg.validation_fraction, cfg.seed);
    train_set = subset(data, tr);
    monitor_set = subset(data, va);
  } else {
    train_set = data;
    monitor_set = data;
  }

  TrainHistory history;
  if (cfg.max_epochs_nadam == 0 && cfg.max_epochs_sgd == 0) return history;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  double global_best = mean_loss(model, monitor_set, features);
  Snapshot global_snapshot = Snapshot::of(model);

  ad::Nadam nadam(cfg.nadam);
  run_phase(model, nadam, Phase::Nadam, cfg.max_epochs_nadam, train_set, monitor_set, features, cfg, rng, history,
            global_best, global_snapshot);
  ad::SgdMomentum sgd(cfg.sgd);
  run_phase(model, sgd, Phase::Sgd, cfg.max_epochs_sgd, train_set, monitor_set, features, cfg, rng, history,
            global_best, global_snapshot);

  global_snapshot.restore(model);
  model.zero_grad();
  return history;
}

std::string history_tsv(const TrainHistory& h) {
  auto opt = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string("-"); };
  std::ostringstream out;
  out << "mtvqa-history v1\n";
  out << "converged\t" << opt(h.converged_nadam) << '\t' << opt(h.converged_sgd) << '\t' << h.best_epoch << '\n';
  out << "epoch\tphase\ttrain_loss\tval_loss\tval_accuracy\n";
  char buf[128];
  for (const auto& r : h.epochs) {
    std::snprintf(buf, sizeof buf, "%zu\t%s\t%.17g\t%.17g\t%.17g\n", r.epoch, std::string(to_string(r.phase)).c_str(),
                  r.train_loss, r.val_loss, r.val_accuracy);
    out << buf;
  }
  return out.str();
}

void save_history(const std::filesystem::path& path, const TrainHistory& history) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("harness", "cannot write " + path.string());
  out << history_tsv(history);
  if (!out) throw IoError("harness", "write failed for " + path.string());
}

TrainHistory load_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("harness", "cannot open " + path.string());
  auto fail = [&](std::size_t line, const std::string& why) {
    return FormatError("harness", path.string() + ": line " + std::to_string(line) + ": " + why);
  };
  std::string line;
  if (!std::getline(in, line) || line != "mtvqa-history v1") throw fail(1, "not a history file");
  TrainHistory h;
  if (!std::getline(in, line)) throw fail(2, "missing converged line");
  {
    std::istringstream ls(line);
    std::string tag, a, b;
    std::size_t best = 0;
    if (!(ls >> tag >> a >> b >> best) || tag != "converged") throw fail(2, "bad converged line");
    auto opt = [&](const std::string& s) -> std::optional<std::size_t> {
      if (s == "-") return std::nullopt;
      return parse_number<std::size_t>("converged", s);
    };
    h.converged_nadam = opt(a);
    h.converged_sgd = opt(b);
    h.best_epoch = best;
  }
  if (!std::getline(in, line)) throw fail(3, "missing column header");
  std::size_t n = 3;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    std::istringstream ls(line);
    EpochRecord r;
    std::string phase;
    if (!(ls >> r.epoch >> phase >> r.train_loss >> r.val_loss >> r.val_accuracy)) throw fail(n, "bad epoch row");
    if (phase == "nadam") r.phase = Phase::Nadam;
    else if (phase == "sgd") r.phase = Phase::Sgd;
    else throw fail(n, "unknown phase '" + phase + "'");
    h.epochs.push_back(r);
  }
  return h;
}

}  // namespace mtvqa::harness
