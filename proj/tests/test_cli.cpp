// Copyright (C) 2026 repghost-cpp authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "repghost/cli.hpp"
#include "repghost/weights_io.hpp"

using namespace repghost;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "repghost");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string temp_file(const std::string& name) {
  return (fs::temp_directory_path() / ("repghost_cli_" + name)).string();
}

}  // namespace

TEST_CASE("count prints train and fused numbers") {
  const Run r = run({"count", "--arch", "repghost", "--width", "1.0"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("fused=") != std::string::npos);
  CHECK(r.out.find("(4.05") != std::string::npos);
  CHECK(r.out.find("(142.") != std::string::npos);

  const Run m = run({"count", "--width", "1.0", "--format", "machine"});
  REQUIRE(m.code == kExitOk);
  const auto j = nlohmann::json::parse(m.out);
  CHECK(j.at("params_fused").get<long long>() > 4000000);
  CHECK(j.at("flops_fused").get<long long>() > 140000000);
  CHECK(run({"count", "--width", "1.0", "--format", "machine"}).out == m.out);
}

TEST_CASE("invalid input and unknown flags exit 2") {
  const Run zero = run({"count", "--arch", "repghost", "--width", "0"});
  CHECK(zero.code == kExitUsage);
  CHECK(zero.err.find("width") != std::string::npos);
  const Run unknown = run({"count", "--bogus"});
  CHECK(unknown.code == kExitUsage);
  CHECK(unknown.err.find("Usage") != std::string::npos);
  CHECK(run({}).code == kExitUsage);
  CHECK(run({"count", "--arch", "resnet"}).code == kExitUsage);
  CHECK(run({"count", "--input-hw", "8"}).code == kExitUsage);
  CHECK(run({"convert"}).code == kExitUsage);
  CHECK(run({"import", "--weights", temp_file("does_not_exist.rgw")}).code == kExitUsage);
}

TEST_CASE("verify passes on a seeded network") {
  const Run r = run({"verify", "--arch", "repghost", "--width", "0.5", "--seed", "3", "--trials", "2"});
  CHECK(r.code == kExitOk);
  CHECK(r.out.find("PASS") != std::string::npos);
  const Run strict = run({"verify", "--width", "0.5", "--trials", "1", "--tol", "0", "--input-hw", "64"});
  CHECK(strict.code == kExitVerifyFailed);
}

TEST_CASE("convert, export and import") {
  const std::string deploy = temp_file("deploy.rgw");
  const std::string train = temp_file("train.rgw");
  REQUIRE(run({"convert", "--width", "0.5", "--seed", "4", "--out", deploy}).code == kExitOk);
  REQUIRE(run({"export", "--width", "0.5", "--seed", "4", "--form", "train", "--out", train}).code == kExitOk);
  CHECK(read_manifest(deploy).get("form") == "deploy");
  CHECK(read_manifest(train).get("form") == "train");
  const Run imp = run({"import", "--width", "0.5", "--weights", deploy, "--format", "machine"});
  REQUIRE(imp.code == kExitOk);
  CHECK(nlohmann::json::parse(imp.out).at("bn_tensors").get<int>() == 0);
  // converting a loaded train archive reproduces the directly converted one
  const std::string again = temp_file("again.rgw");
  REQUIRE(run({"convert", "--width", "0.5", "--weights", train, "--out", again}).code == kExitOk);
  CHECK(run({"verify", "--width", "0.5", "--weights", train, "--trials", "1", "--input-hw", "64"}).code == kExitOk);
  CHECK(run({"import", "--width", "1.0", "--weights", deploy}).code == kExitUsage);
  for (const std::string& p : {deploy, train, again}) fs::remove(p);
}

TEST_CASE("bench commands produce parseable reports") {
  const Run op = run({"bench-op", "--arch", "ghost", "--width", "0.5", "--batch-sizes", "1,2", "--iters", "1",
                      "--warmup", "0", "--format", "machine"});
  REQUIRE(op.code == kExitOk);
  const auto j = nlohmann::json::parse(op.out);
  CHECK(j.at("entries").size() == 32 * 2 * 2);

  const Run net = run({"bench-net", "--arch", "repghost", "--width", "0.5", "--iters", "1", "--warmup", "0",
                       "--input-hw", "64", "--layout", "nhwc"});
  REQUIRE(net.code == kExitOk);
  CHECK(net.out.find("entry label=repghost-deploy ") != std::string::npos);
  CHECK(net.out.find("layout=nhwc") != std::string::npos);

  const Run empty = run({"bench-op", "--arch", "repghost", "--width", "0.5", "--iters", "1", "--batch-sizes", "1"});
  CHECK(empty.code == kExitOk);
  CHECK(empty.out.find("note ") != std::string::npos);
}
