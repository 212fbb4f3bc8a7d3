#include "fgpart/synth.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

#include "fgpart/rng.hpp"

namespace fgpart {

const char* to_string(SynthVariant v) {
  switch (v) {
    case SynthVariant::Planted: return "planted";
    case SynthVariant::Distractor: return "distractor";
    case SynthVariant::ScaleBanded: return "scale-banded";
  }
  return "?";
}

SynthVariant parse_synth_variant(const std::string& s) {
  if (s == "planted") return SynthVariant::Planted;
  if (s == "distractor") return SynthVariant::Distractor;
  if (s == "scale-banded") return SynthVariant::ScaleBanded;
  throw std::invalid_argument("unknown synthetic variant '" + s + "' (planted, distractor, scale-banded)");
}

SynthConfig SynthConfig::preset(SynthVariant v) {
  SynthConfig c;
  c.variant = v;
  switch (v) {
    case SynthVariant::Planted:
      // A faint signature keeps the A and B block windows in shared clusters,
      // where the scorers can tell them apart.
      c.signature_amp = 0.3;
      break;
    case SynthVariant::Distractor:
      c.grid = 4;
      c.signature_amp = 0.6;
      c.signature_jitter = 0.2;
      c.distractors = 4;
      c.background_proposals = 3;
      break;
    case SynthVariant::ScaleBanded:
      c.signature_amp = 0.3;
      c.signature_jitter = 0.1;
      c.texture_level = 0.8;
      c.distractors = 4;
      break;
  }
  return c;
}

namespace {

struct Map {
  int grid;
  std::vector<float> v;
  float& at(int r, int c, int ch) { return v[(static_cast<std::size_t>(r) * grid + c) * kSynthChannels + ch]; }
  void raise(int r, int c, int ch, double value) {
    float& x = at(r, c, ch);
    x = std::max(x, static_cast<float>(value));
  }
};

Map noise_map(const SynthConfig& cfg, Rng& rng) {
  const int n = cfg.grid;
  Map m{n, std::vector<float>(static_cast<std::size_t>(n) * n * kSynthChannels, 0.0f)};
  for (float& x : m.v) x = static_cast<float>(cfg.noise_amp * rng.uniform());
  return m;
}

template <class Skip>
void background_spikes(const SynthConfig& cfg, Rng& rng, Map& m, Skip skip) {
  for (int r = 0; r < cfg.grid; ++r) {
    for (int c = 0; c < cfg.grid; ++c) {
      if (skip(r, c)) continue;
      if (rng.uniform() < cfg.background_rate) {
        const int ch = 12 + static_cast<int>(rng.below(4));
        m.raise(r, c, ch, 0.5 + 0.5 * rng.uniform());
      }
    }
  }
}

void add_distractors(const SynthConfig& cfg, Rng& rng, Map& m) {
  const int n = cfg.grid;
  for (int d = 0; d < cfg.distractors; ++d) {
    const int s = std::min(n, 1 + static_cast<int>(rng.below(2)));
    const int dr = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - s + 1)));
    const int dc = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - s + 1)));
    const int ch1 = 4 + static_cast<int>(rng.below(12));
    const int ch2 = 4 + static_cast<int>(rng.below(12));
    const double amp = 0.5 + 1.5 * rng.uniform();
    for (int r = dr; r < dr + s; ++r) {
      for (int c = dc; c < dc + s; ++c) {
        m.raise(r, c, ch1, amp);
        m.raise(r, c, ch2, 0.5 * amp);
      }
    }
  }
}

Map planted_foreground(const SynthConfig& cfg, int label, Rng& rng, Box& planted) {
  const int n = cfg.grid;
  const int b = cfg.block;
  Map m = noise_map(cfg, rng);
  const int r0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - b + 1)));
  const int c0 = static_cast<int>(rng.below(static_cast<std::uint64_t>(n - b + 1)));
  background_spikes(cfg, rng, m, [&](int r, int c) { return r >= r0 && r < r0 + b && c >= c0 && c < c0 + b; });

  for (int r = r0; r < r0 + b; ++r)
    for (int c = c0; c < c0 + b; ++c)
      for (int ch = 0; ch < 4; ++ch) m.raise(r, c, ch, cfg.object_amp * (0.8 + 0.4 * rng.uniform()));

  if (rng.uniform() < cfg.signature_rate) {
    const int corners[4][2] = {{r0, c0}, {r0, c0 + b - 1}, {r0 + b - 1, c0}, {r0 + b - 1, c0 + b - 1}};
    for (int q = 0; q < 4; ++q) {
      m.raise(corners[q][0], corners[q][1], 4 + 4 * label + q, cfg.signature_amp * (0.8 + 0.4 * rng.uniform()));
    }
  }
  add_distractors(cfg, rng, m);
  planted = Box{16 * c0, 16 * r0, 16 * (c0 + b), 16 * (r0 + b)};
  return m;
}

Map distractor_foreground(const SynthConfig& cfg, int label, Rng& rng, Box& planted) {
  const int n = cfg.grid;
  Map m = noise_map(cfg, rng);
  background_spikes(cfg, rng, m, [](int, int) { return false; });
  add_distractors(cfg, rng, m);
  const int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  for (int ch = 0; ch < 4; ++ch) m.at(r, c, ch) = static_cast<float>(cfg.object_amp * (1.0 + 0.2 * rng.uniform()));
  const double shift = (label == 1 ? cfg.signature_amp : -cfg.signature_amp) + cfg.signature_jitter * rng.normal();
  m.at(r, c, 0) += static_cast<float>(shift);
  m.at(r, c, 1) -= static_cast<float>(shift);
  planted = Box{16 * c, 16 * r, 16 * (c + 1), 16 * (r + 1)};
  return m;
}

Map banded_foreground(const SynthConfig& cfg, int label, Rng& rng, Box& planted) {
  const int n = cfg.grid;
  Map m = noise_map(cfg, rng);
  background_spikes(cfg, rng, m, [](int, int) { return false; });
  add_distractors(cfg, rng, m);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      for (int ch = 0; ch < 4; ++ch) m.at(r, c, ch) = static_cast<float>(cfg.object_amp * (1.0 + 0.2 * rng.uniform()));
      for (int ch = 4; ch < 8; ++ch) m.at(r, c, ch) = static_cast<float>(cfg.texture_level + 0.5 * rng.uniform());
    }
  }
  const int r = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  const int c = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  for (int ch = 4; ch < 8; ++ch) {
    const double level = (ch + label) % 2 ? cfg.signature_amp : 0.1;
    m.at(r, c, ch) = static_cast<float>(level + cfg.signature_jitter * rng.uniform());
  }
  planted = Box{16 * c, 16 * r, 16 * (c + 1), 16 * (r + 1)};
  return m;
}

ProposalRecord full_proposal(int n, Map&& m) {
  ProposalRecord p;
  p.box = Box{0, 0, 16 * n, 16 * n};
  p.grid = n;
  p.channels = kSynthChannels;
  p.values = std::move(m.v);
  return p;
}

ImageRecord make_image(const SynthConfig& cfg, int label, Split split, std::size_t index, Box& planted) {
  Rng rng(derive_seed(cfg.seed, index));
  const int n = cfg.grid;
  ImageRecord rec;
  char id[32];
  std::snprintf(id, sizeof id, "%s-%05zu", split == Split::Train ? "train" : "test", index);
  rec.image_id = id;
  rec.label = label;
  rec.split = split;
  rec.width = rec.height = 16 * n;

  Map fg{n, {}};
  switch (cfg.variant) {
    case SynthVariant::Planted: fg = planted_foreground(cfg, label, rng, planted); break;
    case SynthVariant::Distractor: fg = distractor_foreground(cfg, label, rng, planted); break;
    case SynthVariant::ScaleBanded: fg = banded_foreground(cfg, label, rng, planted); break;
  }
  rec.proposals.push_back(full_proposal(n, std::move(fg)));
  for (int b = 0; b < cfg.background_proposals; ++b) {
    Map m = noise_map(cfg, rng);
    background_spikes(cfg, rng, m, [](int, int) { return false; });
    add_distractors(cfg, rng, m);
    rec.proposals.push_back(full_proposal(n, std::move(m)));
  }
  return rec;
}

}  // namespace

SynthDataset make_synthetic(const SynthConfig& config) {
  if (config.grid < 1 || config.block < 1 || config.block > config.grid) {
    throw std::invalid_argument("synthetic: need 1 <= block <= grid");
  }
  if (config.train_per_class < 0 || config.test_per_class < 0 || config.distractors < 0 ||
      config.background_proposals < 0) {
    throw std::invalid_argument("synthetic: negative count");
  }
  SynthDataset ds;
  ds.config = config;
  ds.stack = synthetic_stack(config.grid);
  std::size_t index = 0;
  for (Split split : {Split::Train, Split::Test}) {
    const int per_class = split == Split::Train ? config.train_per_class : config.test_per_class;
    for (int i = 0; i < per_class; ++i) {
      for (int label = 0; label < 2; ++label) {
        Box planted;
        ds.records.push_back(make_image(config, label, split, index++, planted));
        ds.planted.push_back(planted);
      }
    }
  }
  return ds;
}

}  // namespace fgpart
