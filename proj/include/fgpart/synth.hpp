#pragma once

// Procedural two-class "fine-grained" feature maps for tests and demos. Every
// image carries one foreground proposal (first) and optionally some
// background proposals, all covering the full image; grid cells map
// one-to-one onto 16 x 16 pixel squares (see synthetic_stack). Channel bands:
//
//   0..3    object channels
//   4..11   class signature channels (variant specific, see below)
//   12..15  background spikes
//
// Distractor objects (1x1 or 2x2, two random channels from 4..15) land on
// every proposal and do not depend on the class.
//
// Planted      an object block lights 0..3; class A lights channels 4..7 on
//              the four block corners, B lights 8..11. Only windows spanning
//              the whole block carry the full signature.
// Distractor   a single object cell whose 0/1 balance is shifted by the class;
//              background proposals and distractors fill the remaining
//              clusters with class-independent variation.
// ScaleBanded  the whole foreground is object texture with 4..7 high except
//              one cell holding a faint class pattern on 4..7 (odd channels
//              for A, even for B). Any window wider than one cell max-pools
//              the pattern away, so only the finest scale sees the class.

#include <cstdint>
#include <string>
#include <vector>

#include "fgpart/featio.hpp"
#include "fgpart/geometry.hpp"

namespace fgpart {

enum class SynthVariant { Planted, Distractor, ScaleBanded };

const char* to_string(SynthVariant v);
SynthVariant parse_synth_variant(const std::string& s);

struct SynthConfig {
  SynthVariant variant = SynthVariant::Planted;
  int grid = 6;
  int block = 4;  // Planted: side of the object block
  int train_per_class = 100;
  int test_per_class = 100;
  std::uint64_t seed = 0;

  double noise_amp = 0.05;       // dense low-level noise, all channels
  double background_rate = 0.3;  // spike probability per cell on 12..15
  double object_amp = 1.0;
  double signature_amp = 1.0;
  double signature_rate = 1.0;     // Planted: probability an image shows its signature
  double signature_jitter = 0.0;   // Distractor: normal sd; ScaleBanded: uniform width
  double texture_level = 0.8;      // ScaleBanded: floor of the 4..7 texture
  int distractors = 0;             // distractor objects per proposal
  int background_proposals = 0;

  /// Defaults tuned for each variant.
  static SynthConfig preset(SynthVariant v);
};

struct SynthDataset {
  SynthConfig config;
  LayerStack stack;
  std::vector<ImageRecord> records;  // train images first, classes interleaved
  std::vector<Box> planted;          // per record, signal region in pixels
};

inline constexpr int kSynthChannels = 16;

SynthDataset make_synthetic(const SynthConfig& config);

}  // namespace fgpart
