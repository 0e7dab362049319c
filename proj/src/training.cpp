#include "salsanet/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>

#include "salsanet/error.hpp"
#include "salsanet/io.hpp"

namespace salsanet {

ClassStats stats_from_counts(const std::array<std::uint64_t, kNumClasses>& counts) {
  ClassStats stats;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    stats.frequency[i] = std::max<std::uint64_t>(counts[i], 1);
    stats.alpha[i] = 1.0 / std::sqrt(static_cast<double>(stats.frequency[i]));
  }
  return stats;
}

ClassStats class_frequencies(std::span<const LabelGrid> labels) {
  if (labels.empty()) throw Error(ErrorCode::kEmptyInput, "class_frequencies needs at least one label grid");
  std::array<std::uint64_t, kNumClasses> counts{};
  for (const LabelGrid& grid : labels) {
    for (ClassId c : grid.data()) ++counts[index_of(c)];
  }
  return stats_from_counts(counts);
}

LossResult weighted_ce_loss(const nn::Tensor& logits, std::span<const LabelGrid* const> labels, const Alpha& alpha) {
  if (logits.rank() != 4 || logits.dim(1) != kNumClasses || logits.dim(0) != labels.size()) {
    throw Error(ErrorCode::kShape, "loss expects logits [N,3,H,W] for N label grids, got " +
                                       nn::to_string(logits.shape()) + " for " + std::to_string(labels.size()));
  }
  const std::size_t n = logits.dim(0), h = logits.dim(2), w = logits.dim(3), hw = h * w;
  for (const LabelGrid* grid : labels) {
    if (static_cast<std::size_t>(grid->height()) != h || static_cast<std::size_t>(grid->width()) != w) {
      throw Error(ErrorCode::kShape, "label grid " + std::to_string(grid->height()) + "x" +
                                         std::to_string(grid->width()) + " does not match logits " +
                                         nn::to_string(logits.shape()));
    }
  }
  const double inv_pixels = 1.0 / static_cast<double>(n * hw);
  LossResult result{0.0, nn::Tensor(logits.shape())};
  double total = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    const float* x = logits.data() + b * kNumClasses * hw;
    float* g = result.grad_logits.data() + b * kNumClasses * hw;
    const auto& truth = labels[b]->data();
    for (std::size_t p = 0; p < hw; ++p) {
      double peak = x[p];
      for (std::size_t k = 1; k < kNumClasses; ++k) peak = std::max(peak, static_cast<double>(x[k * hw + p]));
      double e[kNumClasses];
      double sum = 0.0;
      for (std::size_t k = 0; k < kNumClasses; ++k) {
        e[k] = std::exp(static_cast<double>(x[k * hw + p]) - peak);
        sum += e[k];
      }
      const std::size_t c = index_of(truth[p]);
      const double log_prob = static_cast<double>(x[c * hw + p]) - peak - std::log(sum);
      total += -alpha[c] * log_prob;
      for (std::size_t k = 0; k < kNumClasses; ++k) {
        const double prob = e[k] / sum;
        g[k * hw + p] = static_cast<float>(alpha[c] * (prob - (k == c ? 1.0 : 0.0)) * inv_pixels);
      }
    }
  }
  result.loss = total * inv_pixels;
  return result;
}

LossResult weighted_ce_loss(const nn::Tensor& logits, std::span<const LabelGrid> labels, const Alpha& alpha) {
  std::vector<const LabelGrid*> ptrs;
  for (const LabelGrid& l : labels) ptrs.push_back(&l);
  return weighted_ce_loss(logits, std::span<const LabelGrid* const>(ptrs), alpha);
}

namespace {

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw Error(ErrorCode::kConfig, "config key '" + std::string(key) + "': bad value '" + std::string(value) + "'");
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) bad_value(key, v);
  return out;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v);
  return out;
}

int to_int(std::string_view key, std::string_view v) {
  const auto u = to_uint(key, v);
  if (u > 1'000'000) bad_value(key, v);
  return static_cast<int>(u);
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  bad_value(key, v);
}

using Setter = void (*)(TrainConfig&, std::string_view, std::string_view);

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table = {
      {"lr0", [](TrainConfig& c, std::string_view k, std::string_view v) { c.lr0 = to_double(k, v); }},
      {"lr_decay", [](TrainConfig& c, std::string_view k, std::string_view v) { c.lr_decay = to_double(k, v); }},
      {"decay_every", [](TrainConfig& c, std::string_view k, std::string_view v) { c.decay_every = to_uint(k, v); }},
      {"dropout", [](TrainConfig& c, std::string_view k, std::string_view v) { c.dropout = static_cast<float>(to_double(k, v)); }},
      {"batch_size", [](TrainConfig& c, std::string_view k, std::string_view v) { c.batch_size = to_uint(k, v); }},
      {"epochs", [](TrainConfig& c, std::string_view k, std::string_view v) { c.epochs = to_uint(k, v); }},
      {"max_iterations", [](TrainConfig& c, std::string_view k, std::string_view v) { c.max_iterations = to_uint(k, v); }},
      {"adam_beta1", [](TrainConfig& c, std::string_view k, std::string_view v) { c.adam_beta1 = to_double(k, v); }},
      {"adam_beta2", [](TrainConfig& c, std::string_view k, std::string_view v) { c.adam_beta2 = to_double(k, v); }},
      {"adam_eps", [](TrainConfig& c, std::string_view k, std::string_view v) { c.adam_eps = to_double(k, v); }},
      {"augment", [](TrainConfig& c, std::string_view k, std::string_view v) { c.augment = to_bool(k, v); }},
      {"flip_probability", [](TrainConfig& c, std::string_view k, std::string_view v) { c.flip_probability = to_double(k, v); }},
      {"noise_probability", [](TrainConfig& c, std::string_view k, std::string_view v) { c.noise_probability = to_double(k, v); }},
      {"noise_sigma", [](TrainConfig& c, std::string_view k, std::string_view v) { c.noise_sigma = to_double(k, v); }},
      {"max_rotation_deg", [](TrainConfig& c, std::string_view k, std::string_view v) { c.max_rotation_deg = to_double(k, v); }},
      {"class_weights", [](TrainConfig& c, std::string_view k, std::string_view v) { c.class_weights = to_bool(k, v); }},
      {"bn_momentum", [](TrainConfig& c, std::string_view k, std::string_view v) { c.bn_momentum = static_cast<float>(to_double(k, v)); }},
      {"seed", [](TrainConfig& c, std::string_view k, std::string_view v) { c.seed = to_uint(k, v); }},
      {"checkpoint_every", [](TrainConfig& c, std::string_view k, std::string_view v) { c.checkpoint_every = to_uint(k, v); }},
      {"data_dir", [](TrainConfig& c, std::string_view, std::string_view v) { c.data_dir = std::string(v); }},
      {"out_dir", [](TrainConfig& c, std::string_view, std::string_view v) { c.out_dir = std::string(v); }},
      {"view", [](TrainConfig& c, std::string_view k, std::string_view v) {
         try {
           c.input.view = parse_view(v);
         } catch (const Error&) {
           bad_value(k, v);
         }
       }},
      {"bev_x_min", [](TrainConfig& c, std::string_view k, std::string_view v) { c.input.bev.roi.x_min = to_double(k, v); }},
      {"bev_x_max", [](TrainConfig& c, std::string_view k, std::string_view v) { c.input.bev.roi.x_max = to_double(k, v); }},
      {"bev_y_min", [](TrainConfig& c, std::string_view k, std::string_view v) { c.input.bev.roi.y_min = to_double(k, v); }},
      {"bev_y_max", [](TrainConfig& c, std::string_view k, std::string_view v) { c.input.bev.roi.y_max = to_double(k, v); }},
      {"bev_cell_x", [](TrainConfig& c, std::string_view k, std::string_view v) { c.input.bev.cell_x = to_double(k, v); }},
      {"bev_cell_y", [](TrainConfig& c, std::string_view k, std::string_view v) { c.input.bev.cell_y = to_double(k, v); }},
      {"bev_rows", [](TrainConfig& c, std::string_view k, std::string_view v) { c.input.bev.rows = to_int(k, v); }},
      {"bev_cols", [](TrainConfig& c, std::string_view k, std::string_view v) { c.input.bev.cols = to_int(k, v); }},
      {"sfv_fov_deg", [](TrainConfig& c, std::string_view k, std::string_view v) { c.input.sfv.azimuth_fov_deg = to_double(k, v); }},
      {"sfv_zenith_min_deg", [](TrainConfig& c, std::string_view k, std::string_view v) { c.input.sfv.zenith_min_deg = to_double(k, v); }},
      {"sfv_zenith_max_deg", [](TrainConfig& c, std::string_view k, std::string_view v) { c.input.sfv.zenith_max_deg = to_double(k, v); }},
      {"sfv_rows", [](TrainConfig& c, std::string_view k, std::string_view v) { c.input.sfv.rows = to_int(k, v); }},
      {"sfv_cols", [](TrainConfig& c, std::string_view k, std::string_view v) { c.input.sfv.cols = to_int(k, v); }},
  };
  return table;
}

void check(bool ok, const char* key, const char* rule) {
  if (!ok) throw Error(ErrorCode::kConfig, std::string("config key '") + key + "': " + rule);
}

}  // namespace

void set_config_value(TrainConfig& config, std::string_view key, std::string_view value) {
  const auto it = setters().find(key);
  if (it == setters().end()) throw Error(ErrorCode::kConfig, "unknown config key '" + std::string(key) + "'");
  it->second(config, key, value);
}

void TrainConfig::validate() const {
  check(lr0 >= 0.0, "lr0", "must be >= 0");
  check(lr_decay > 0.0 && lr_decay <= 1.0, "lr_decay", "must lie in (0, 1]");
  check(decay_every >= 1, "decay_every", "must be >= 1");
  check(dropout >= 0.0f && dropout < 1.0f, "dropout", "must lie in [0, 1)");
  check(batch_size >= 1, "batch_size", "must be >= 1");
  check(epochs >= 1, "epochs", "must be >= 1");
  check(adam_beta1 >= 0.0 && adam_beta1 < 1.0, "adam_beta1", "must lie in [0, 1)");
  check(adam_beta2 >= 0.0 && adam_beta2 < 1.0, "adam_beta2", "must lie in [0, 1)");
  check(adam_eps > 0.0, "adam_eps", "must be > 0");
  check(flip_probability >= 0.0 && flip_probability <= 1.0, "flip_probability", "must lie in [0, 1]");
  check(noise_probability >= 0.0 && noise_probability <= 1.0, "noise_probability", "must lie in [0, 1]");
  check(noise_sigma >= 0.0, "noise_sigma", "must be >= 0");
  check(max_rotation_deg >= 0.0, "max_rotation_deg", "must be >= 0");
  check(bn_momentum >= 0.0f && bn_momentum < 1.0f, "bn_momentum", "must lie in [0, 1)");
  const char* rows_key = input.view == GridKind::kBev ? "bev_rows" : "sfv_rows";
  const char* cols_key = input.view == GridKind::kBev ? "bev_cols" : "sfv_cols";
  check(input.rows() > 0 && input.rows() % static_cast<int>(nn::kDownsampleFactor) == 0, rows_key,
        "must be a positive multiple of 16");
  check(input.cols() > 0 && input.cols() % static_cast<int>(nn::kDownsampleFactor) == 0, cols_key,
        "must be a positive multiple of 16");
  try {
    input.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, std::string("input geometry: ") + e.what());
  }
}

TrainConfig parse_train_config(std::string_view text) {
  TrainConfig config;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? text.size() - start : end - start);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw Error(ErrorCode::kConfig, "config line " + std::to_string(line_no) + ": expected key = value");
      }
      set_config_value(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  config.validate();
  return config;
}

TrainConfig load_train_config(const std::filesystem::path& path) {
  return parse_train_config(io::read_text_file(path));
}

double lr_at(std::uint64_t iteration, const TrainConfig& config) {
  double rate = config.lr0;
  // Repeated multiplication keeps 0.01 * 0.1 * 0.1 == 0.0001 exactly in binary64.
  for (std::uint64_t k = iteration / config.decay_every; k > 0 && rate > 0.0; --k) rate *= config.lr_decay;
  return rate;
}

void adam_step(std::span<nn::Parameter* const> params, AdamState& state, double lr, const AdamHyper& hyper) {
  if (state.first_moment.empty()) {
    for (const nn::Parameter* p : params) {
      state.first_moment.emplace_back(p->value.shape());
      state.second_moment.emplace_back(p->value.shape());
    }
  }
  if (state.first_moment.size() != params.size()) {
    throw Error(ErrorCode::kShape, "Adam state tracks " + std::to_string(state.first_moment.size()) +
                                       " tensors, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    nn::require_same_shape(params[i]->value, params[i]->grad, "adam_step");
    nn::require_same_shape(params[i]->value, state.first_moment[i], "adam_step");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double inv_correction1 = 1.0 / (1.0 - std::pow(hyper.beta1, t));
  const double inv_correction2 = 1.0 / (1.0 - std::pow(hyper.beta2, t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto w = params[i]->value.values();
    auto g = params[i]->grad.values();
    auto m = state.first_moment[i].values();
    auto v = state.second_moment[i].values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      const double gj = g[j];
      const double mj = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * gj;
      const double vj = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * gj * gj;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double m_hat = mj * inv_correction1;
      const double v_hat = vj * inv_correction2;
      w[j] = static_cast<float>(w[j] - lr * m_hat / (std::sqrt(v_hat) + hyper.eps));
    }
  }
}

AugmentDraws draw_augmentation(nn::Rng& rng, const TrainConfig& config) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double max_angle = config.max_rotation_deg * std::numbers::pi / 180.0;
  std::uniform_real_distribution<double> angle(-max_angle, max_angle);
  AugmentDraws d;
  d.flip = unit(rng) < config.flip_probability;
  d.noise = unit(rng) < config.noise_probability;
  d.angle_rad = max_angle > 0.0 ? angle(rng) : 0.0;
  return d;
}

PointCloud apply_augmentation(const PointCloud& cloud, const AugmentDraws& draws, double noise_sigma, nn::Rng& rng) {
  PointCloud out = draws.flip ? flip_y(cloud) : cloud;
  if (draws.noise && noise_sigma > 0.0) {
    std::normal_distribution<float> noise(0.0f, static_cast<float>(noise_sigma));
    std::vector<Point> points(out.points().begin(), out.points().end());
    for (Point& p : points) {
      p.x += noise(rng);
      p.y += noise(rng);
      p.z += noise(rng);
    }
    out = out.has_labels() ? PointCloud(std::move(points), {out.labels().begin(), out.labels().end()})
                           : PointCloud(std::move(points));
  }
  if (draws.angle_rad != 0.0) out = rotate_z(out, draws.angle_rad);
  return out;
}

PointCloud augment(const PointCloud& cloud, nn::Rng& rng, const TrainConfig& config) {
  const AugmentDraws draws = draw_augmentation(rng, config);
  return apply_augmentation(cloud, draws, config.noise_sigma, rng);
}

std::vector<LabelGrid> predict_labels(const nn::Tensor& logits) {
  if (logits.rank() != 4 || logits.dim(1) != kNumClasses) {
    throw Error(ErrorCode::kShape, "expected logits [N,3,H,W], got " + nn::to_string(logits.shape()));
  }
  const std::size_t n = logits.dim(0), h = logits.dim(2), w = logits.dim(3), hw = h * w;
  std::vector<LabelGrid> out;
  for (std::size_t b = 0; b < n; ++b) {
    std::vector<ClassId> cells(hw);
    const float* x = logits.data() + b * kNumClasses * hw;
    for (std::size_t p = 0; p < hw; ++p) {
      std::size_t best = 0;
      for (std::size_t k = 1; k < kNumClasses; ++k) {
        if (x[k * hw + p] > x[best * hw + p]) best = k;
      }
      cells[p] = static_cast<ClassId>(best);
    }
    out.emplace_back(static_cast<int>(h), static_cast<int>(w), std::move(cells));
  }
  return out;
}

std::string format_log_row(const TrainLogRow& row) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%llu,%.9g,%.9g", static_cast<unsigned long long>(row.iteration), row.lr, row.loss);
  return buf;
}

nn::ArchSpec arch_for(const TrainConfig& config) {
  nn::ArchSpec arch;
  arch.in_channels = static_cast<std::size_t>(config.input.channels());
  arch.dropout = config.dropout;
  arch.bn_momentum = config.bn_momentum;
  return arch;
}

TrainResult train(std::span<const Sample> data, const TrainConfig& config, const TrainHooks& hooks) {
  if (data.empty()) throw Error(ErrorCode::kEmptyInput, "training set is empty");
  config.validate();
  for (const Sample& s : data) {
    if (s.grid.height() != config.input.rows() || s.grid.width() != config.input.cols() ||
        s.grid.channels() != config.input.channels()) {
      throw Error(ErrorCode::kShape, "sample '" + s.id + "' does not match the configured input grid");
    }
  }

  std::vector<LabelGrid> targets;
  for (const Sample& s : data) targets.push_back(s.labels);
  TrainResult result{nn::SalsaNet(arch_for(config), config.seed), class_frequencies(targets), {}, 0};
  const Alpha alpha = config.class_weights ? result.stats.alpha : Alpha{1.0, 1.0, 1.0};

  nn::Rng rng(config.seed ^ 0x9E3779B97F4A7C15ull);
  AdamState adam;
  const AdamHyper hyper{config.adam_beta1, config.adam_beta2, config.adam_eps};
  auto params = result.net.parameters();

  const std::size_t batches_per_epoch = (data.size() + config.batch_size - 1) / config.batch_size;
  std::uint64_t total = static_cast<std::uint64_t>(config.epochs) * batches_per_epoch;
  if (config.max_iterations > 0) total = std::min(total, config.max_iterations);

  std::vector<std::size_t> order(data.size());
  std::uint64_t iteration = 0;
  for (std::size_t epoch = 0; epoch < config.epochs && iteration < total; ++epoch) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i - 1);
      std::swap(order[i - 1], order[pick(rng)]);
    }
    for (std::size_t start = 0; start < order.size() && iteration < total; start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::vector<GridImage> augmented_grids;
      std::vector<LabelGrid> augmented_labels;
      augmented_grids.reserve(stop - start);
      augmented_labels.reserve(stop - start);
      std::vector<const GridImage*> grids;
      std::vector<const LabelGrid*> labels;
      for (std::size_t i = start; i < stop; ++i) {
        const Sample& s = data[order[i]];
        if (config.augment && s.cloud) {
          const PointCloud cloud = augment(*s.cloud, rng, config);
          augmented_grids.push_back(config.input.project(cloud));
          augmented_labels.push_back(config.input.rasterize(cloud));
          grids.push_back(&augmented_grids.back());
          labels.push_back(&augmented_labels.back());
        } else {
          grids.push_back(&s.grid);
          labels.push_back(&s.labels);
        }
      }
      const nn::Tensor batch = to_nchw(grids);
      nn::SalsaNet::Cache cache;
      const nn::Tensor logits = result.net.train_forward(batch, rng, cache);
      LossResult loss = weighted_ce_loss(logits, labels, alpha);
      if (!std::isfinite(loss.loss)) {
        if (hooks.on_non_finite) hooks.on_non_finite(batch, iteration);
        throw Error(ErrorCode::kNonFinite, "non-finite loss at iteration " + std::to_string(iteration) + " (epoch " +
                                               std::to_string(epoch) + ", batch " +
                                               std::to_string(start / config.batch_size) + ", first sample '" +
                                               data[order[start]].id + "')");
      }
      result.net.zero_grad();
      result.net.backward(loss.grad_logits, cache);
      const double lr = lr_at(iteration, config);
      adam_step(params, adam, lr, hyper);

      TrainLogRow row{iteration, lr, loss.loss};
      result.log.push_back(row);
      if (hooks.on_iteration) hooks.on_iteration(row);
      ++iteration;
      if (hooks.on_checkpoint && config.checkpoint_every > 0 && iteration % config.checkpoint_every == 0 &&
          iteration < total) {
        hooks.on_checkpoint(result.net, iteration);
      }
    }
  }
  result.iterations = iteration;
  return result;
}

TrainResult run_training(const TrainConfig& config) {
  config.validate();
  if (config.data_dir.empty()) throw Error(ErrorCode::kConfig, "config key 'data_dir': required");
  if (config.out_dir.empty()) throw Error(ErrorCode::kConfig, "config key 'out_dir': required");
  const auto data = load_dataset_dir(config.data_dir, config.input);
  const std::filesystem::path out = config.out_dir;
  std::filesystem::create_directories(out);

  std::ofstream log(out / "train_log.csv", std::ios::trunc);
  if (!log) throw Error(ErrorCode::kIo, "cannot write " + (out / "train_log.csv").string());
  log << "iteration,lr,loss\n";
  const std::string input_json = config.input.to_json();

  TrainHooks hooks;
  hooks.on_iteration = [&log](const TrainLogRow& row) { log << format_log_row(row) << '\n'; };
  hooks.on_checkpoint = [&](nn::SalsaNet& net, std::uint64_t done) {
    nn::save_checkpoint(nn::make_checkpoint(net, done, input_json), out / ("checkpoint_" + std::to_string(done) + ".snck"));
  };
  hooks.on_non_finite = [&](const nn::Tensor& batch, std::uint64_t) { nn::save_tnsr(batch, out / "nonfinite_batch.tnsr"); };

  TrainResult result = train(data, config, hooks);
  log.flush();
  if (!log) throw Error(ErrorCode::kIo, "write failed on train_log.csv");
  nn::save_checkpoint(nn::make_checkpoint(result.net, result.iterations, input_json), out / "checkpoint.snck");
  return result;
}

ConfusionMatrix evaluate(const nn::SalsaNet& net, std::span<const Sample> data, std::size_t batch_size) {
  ConfusionMatrix cm;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    const std::size_t stop = std::min(data.size(), start + batch_size);
    std::vector<const GridImage*> grids;
    for (std::size_t i = start; i < stop; ++i) grids.push_back(&data[i].grid);
    const auto predictions = predict_labels(net.infer(to_nchw(grids)));
    for (std::size_t i = start; i < stop; ++i) accumulate(cm, predictions[i - start], data[i].labels);
  }
  return cm;
}

}  // namespace salsanet
