// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "repghost/network.hpp"

namespace repghost {

/// Single-file weight archive:
///
///   bytes 0..7    magic "RGWEIGHT"
///   u32 LE        format version (1)
///   u64 LE        manifest length in bytes
///   manifest      UTF-8 text, '\n'-terminated lines:
///                   "@<key> <value>"                   metadata (arch, form, width, ...)
///                   "<name> <d0>x<d1>x... <offset>"   one per tensor, offset in bytes
///                                                      from the start of the blob section
///   blobs         little-endian IEEE-754 float32 arrays
inline constexpr char kArchiveMagic[8] = {'R', 'G', 'W', 'E', 'I', 'G', 'H', 'T'};
inline constexpr std::uint32_t kArchiveVersion = 1;

struct ArchiveEntry {
  std::string name;
  std::vector<int> dims;
  std::uint64_t offset = 0;

  std::uint64_t element_count() const;
};

struct ArchiveManifest {
  std::vector<std::pair<std::string, std::string>> metadata;
  std::vector<ArchiveEntry> entries;

  std::string get(const std::string& key) const;
};

void save_archive(const Network& net, const std::string& path);
// Rebuilds the network described by `spec` (train or deploy form, as recorded
// in the archive) and fills it from the file. Every tensor is checked before
// any parameter is written.
Network load_archive(const std::string& path, const NetworkSpec& spec);

ArchiveManifest read_manifest(const std::string& path);
// Total float32 scalars stored in the archive.
std::uint64_t archive_scalar_count(const std::string& path);

}  // namespace repghost
