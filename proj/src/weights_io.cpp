// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include "repghost/weights_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "repghost/error.hpp"

namespace repghost {

namespace {

constexpr std::size_t kHeaderBytes = 8 + 4 + 8;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::string& bytes, std::size_t pos, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  return v;
}

void put_f32(std::string& out, float f) {
  put_u32(out, std::bit_cast<std::uint32_t>(f));
}

std::string dims_token(const std::vector<int>& dims) {
  std::string s;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(dims[i]);
  }
  return s;
}

std::vector<int> parse_dims(const std::string& token) {
  std::vector<int> dims;
  std::istringstream in(token);
  std::string part;
  while (std::getline(in, part, 'x')) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(part, &used);
    } catch (const std::exception&) {
      throw FormatError("archive manifest: bad dims '" + token + "'");
    }
    if (used != part.size() || v < 1) throw FormatError("archive manifest: bad dims '" + token + "'");
    dims.push_back(v);
  }
  if (dims.empty()) throw FormatError("archive manifest: empty dims");
  return dims;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading '" + path + "'");
  return bytes;
}

struct ParsedArchive {
  ArchiveManifest manifest;
  std::string bytes;
  std::size_t blob_start = 0;
};

ParsedArchive parse_archive(const std::string& path) {
  ParsedArchive a;
  a.bytes = read_file(path);
  const std::string& b = a.bytes;
  if (b.size() < 8 || std::memcmp(b.data(), kArchiveMagic, 8) != 0) {
    throw FormatError("'" + path + "' is not a weight archive (bad magic)");
  }
  if (b.size() < kHeaderBytes) throw IoError("'" + path + "' is truncated inside the header");
  const auto version = static_cast<std::uint32_t>(get_le(b, 8, 4));
  if (version != kArchiveVersion) {
    throw FormatError("unsupported archive version " + std::to_string(version) + " (expected " +
                      std::to_string(kArchiveVersion) + ")");
  }
  const std::uint64_t manifest_len = get_le(b, 12, 8);
  if (manifest_len > b.size() - kHeaderBytes) throw IoError("'" + path + "' is truncated inside the manifest");
  a.blob_start = kHeaderBytes + manifest_len;

  std::istringstream in(b.substr(kHeaderBytes, manifest_len));
  std::string line;
  std::set<std::string> names;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    if (line[0] == '@') {
      std::string key;
      fields >> key;
      std::string value;
      std::getline(fields >> std::ws, value);
      a.manifest.metadata.emplace_back(key.substr(1), value);
      continue;
    }
    ArchiveEntry e;
    std::string dims;
    std::string extra;
    if (!(fields >> e.name >> dims >> e.offset) || (fields >> extra)) {
      throw FormatError("archive manifest: malformed line '" + line + "'");
    }
    e.dims = parse_dims(dims);
    if (!names.insert(e.name).second) throw FormatError("archive manifest: duplicate tensor '" + e.name + "'");
    a.manifest.entries.push_back(std::move(e));
  }

  // offsets must tile without overlap and stay inside the blob section
  std::map<std::uint64_t, const ArchiveEntry*> by_offset;
  for (const ArchiveEntry& e : a.manifest.entries) {
    if (e.offset % 4 != 0) throw FormatError("archive manifest: misaligned offset for '" + e.name + "'");
    if (!by_offset.emplace(e.offset, &e).second) throw FormatError("archive manifest: overlapping tensor '" + e.name + "'");
  }
  std::uint64_t cursor = 0;
  for (const auto& [offset, e] : by_offset) {
    if (offset < cursor) throw FormatError("archive manifest: overlapping tensor '" + e->name + "'");
    cursor = offset + 4 * e->element_count();
  }
  if (cursor > b.size() - a.blob_start) throw IoError("'" + path + "' is truncated inside the tensor data");
  return a;
}

}  // namespace

std::uint64_t ArchiveEntry::element_count() const {
  std::uint64_t n = 1;
  for (int d : dims) n *= static_cast<std::uint64_t>(d);
  return n;
}

std::string ArchiveManifest::get(const std::string& key) const {
  for (const auto& [k, v] : metadata) {
    if (k == key) return v;
  }
  return {};
}

void save_archive(const Network& net, const std::string& path) {
  Network copy = net;
  const std::vector<ParamRef> params = collect_params(copy);

  char width[40];
  std::snprintf(width, sizeof(width), "%.17g", net.spec.width);
  std::string manifest;
  manifest += "@arch " + to_string(net.spec.arch) + "\n";
  manifest += "@form " + to_string(net.form) + "\n";
  manifest += std::string("@width ") + width + "\n";
  manifest += std::string("@use_shortcut ") + (net.spec.use_shortcut ? "1" : "0") + "\n";
  if (net.spec.arch == Arch::RepGhost) manifest += "@variant " + net.spec.variant.name + "\n";

  std::string blobs;
  for (const ParamRef& p : params) {
    manifest += p.name + " " + dims_token(p.dims) + " " + std::to_string(blobs.size()) + "\n";
    for (float f : *p.data) put_f32(blobs, f);
  }

  std::string out(kArchiveMagic, 8);
  put_u32(out, kArchiveVersion);
  put_u64(out, manifest.size());
  out += manifest;
  out += blobs;

  // write to a sibling temp file, then rename, so readers never see half a file
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write '" + tmp + "'");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("error writing '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move archive into place at '" + path + "'");
}

ArchiveManifest read_manifest(const std::string& path) {
  return parse_archive(path).manifest;
}

std::uint64_t archive_scalar_count(const std::string& path) {
  std::uint64_t n = 0;
  for (const ArchiveEntry& e : read_manifest(path).entries) n += e.element_count();
  return n;
}

Network load_archive(const std::string& path, const NetworkSpec& spec) {
  const ParsedArchive a = parse_archive(path);
  const std::string arch = a.manifest.get("arch");
  if (arch != to_string(spec.arch)) {
    throw ConfigError("archive holds a '" + arch + "' network, spec asks for '" + to_string(spec.arch) + "'");
  }
  const std::string form = a.manifest.get("form");
  if (form != "train" && form != "deploy") throw FormatError("archive has unknown form '" + form + "'");

  Network net = build_network(spec, 0);
  if (form == "deploy") net = convert_network(net);
  std::vector<ParamRef> params = collect_params(net);

  std::map<std::string, const ArchiveEntry*> by_name;
  for (const ArchiveEntry& e : a.manifest.entries) by_name[e.name] = &e;

  for (const ParamRef& p : params) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw ConfigError("archive is missing tensor '" + p.name + "'");
    if (it->second->dims != p.dims) {
      throw ConfigError("shape mismatch for tensor '" + p.name + "': archive has " + dims_token(it->second->dims) +
                        ", spec expects " + dims_token(p.dims));
    }
  }
  if (by_name.size() != params.size()) {
    std::set<std::string> expected;
    for (const ParamRef& p : params) expected.insert(p.name);
    for (const ArchiveEntry& e : a.manifest.entries) {
      if (!expected.count(e.name)) throw ConfigError("archive has unexpected tensor '" + e.name + "'");
    }
  }

  for (ParamRef& p : params) {
    const ArchiveEntry& e = *by_name.at(p.name);
    const std::size_t base = a.blob_start + e.offset;
    for (std::size_t i = 0; i < p.data->size(); ++i) {
      (*p.data)[i] = std::bit_cast<float>(static_cast<std::uint32_t>(get_le(a.bytes, base + 4 * i, 4)));
    }
  }
  return net;
}

}  // namespace repghost
