#pragma once

#include <filesystem>
#include <string>
#include <unistd.h>

#include "skelfont/synth.hpp"

namespace testutil {

// Synthesizes a corpus once per (name) under the temp directory. Built in a
// staging directory and renamed so concurrent test processes never observe a
// half-written corpus.
inline std::filesystem::path corpus(const std::string& name, int glyphs, int canvas, std::uint64_t seed = 7) {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / ("skelfont_corpus_" + name);
  if (fs::exists(root / "manifest.json")) return root;
  const fs::path staging = root.string() + ".staging." + std::to_string(::getpid());
  fs::remove_all(staging);
  skelfont::SynthSpec spec;
  spec.glyph_count = glyphs;
  spec.canvas = canvas;
  spec.seed = seed;
  skelfont::synth_corpus(spec, staging);
  std::error_code ec;
  fs::rename(staging, root, ec);
  if (ec) fs::remove_all(staging);  // another process won the race
  return root;
}

inline std::filesystem::path scratch(const std::string& name) {
  namespace fs = std::filesystem;
  const fs::path p = fs::temp_directory_path() / ("skelfont_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace testutil
