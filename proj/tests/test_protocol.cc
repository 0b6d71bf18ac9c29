#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "orca/golden.h"
#include "orca/protocol.h"
#include "orca/routing.h"
#include "orca/tensor.h"
#include "test_support.h"

using namespace orca;
using namespace orca::wire;
using orca::testing::thrown;

namespace {

Bytes
read_file(const std::filesystem::path& p)
{
  std::ifstream in(p, std::ios::binary);
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

const std::filesystem::path kGoldenDir = std::filesystem::path(ORCA_SOURCE_DIR) / "protocol" / "golden";

}  // namespace

TEST_CASE("request frame layout")
{
  const Bytes f = encode_request(Request{1, Command::get_tensor, 0x01020304, key_body("ab")});
  const Bytes expected = {15, 0, 0, 0,  // length includes itself
                          1,  0,        // version
                          0x02,         // GET_TENSOR
                          4,  3, 2, 1,  // request id
                          2,  0, 'a', 'b'};
  CHECK(f == expected);
  const Request r = decode_request(f);
  CHECK(r.command == Command::get_tensor);
  CHECK(r.request_id == 0x01020304);
  CHECK(r.body == Bytes{2, 0, 'a', 'b'});
}

TEST_CASE("response frame layout")
{
  const Bytes f = encode_response(Response{1, Command::ping, 9, Status::ok, {}});
  CHECK(f == Bytes{12, 0, 0, 0, 1, 0, 0x0B, 9, 0, 0, 0, 0});
  const Response r = decode_response(f);
  CHECK(r.status == Status::ok);
  CHECK(r.request_id == 9);
}

TEST_CASE("frame decode errors")
{
  Bytes f = encode_request(Request{1, Command::ping, 1, {}});
  Bytes longer = f;
  longer.push_back(0);
  CHECK(thrown([&] { decode_request(longer); }) == "Malformed");
  CHECK(thrown([&] { decode_request(Bytes(f.begin(), f.begin() + 5)); }) == "Malformed");
  Bytes badcmd = f;
  badcmd[6] = 0x0D;
  CHECK(thrown([&] { decode_request(badcmd); }) == "Malformed");
  badcmd[6] = 0x00;
  CHECK(thrown([&] { decode_request(badcmd); }) == "Malformed");

  Bytes r = encode_response(Response{1, Command::ping, 1, Status::ok, {}});
  r[11] = 9;
  CHECK(thrown([&] { decode_response(r); }) == "Malformed");
}

TEST_CASE("status codes")
{
  CHECK(static_cast<int>(Status::not_found) == 1);
  CHECK(static_cast<int>(Status::wrong_shard) == 2);
  CHECK(static_cast<int>(Status::malformed) == 3);
  CHECK(static_cast<int>(Status::wrong_kind) == 4);
  CHECK(static_cast<int>(Status::model_not_found) == 5);
  CHECK(static_cast<int>(Status::exec_error) == 6);
  CHECK(static_cast<int>(Status::input_missing) == 7);
  CHECK(static_cast<int>(Status::bad_model) == 8);
  for (uint8_t s = 1; s <= 8; ++s) {
    CHECK(status_for(error_for(static_cast<Status>(s))) == static_cast<Status>(s));
  }
}

TEST_CASE("error responses carry codes, owners and messages")
{
  const Request req{1, Command::get_tensor, 5, key_body("k")};
  const Response wrong = error_response(req, Error(ErrorCode::WrongShard, "elsewhere", 3));
  CHECK(wrong.status == Status::wrong_shard);
  CHECK(wrong.request_id == 5);
  try {
    raise(decode_response(encode_response(wrong)));
    FAIL("raise returned");
  }
  catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WrongShard);
    CHECK(e.owner() == 3);
    CHECK(e.detail().find("elsewhere") != std::string::npos);
  }
  const Response nf = error_response(req, Error(ErrorCode::NotFound, "no key"));
  CHECK(thrown([&] { raise(nf); }) == "NotFound");
  const Response bm = error_response(req, Error(ErrorCode::Truncated, "short blob"));
  CHECK(bm.status == Status::malformed);
}

TEST_CASE("topology and stats bodies")
{
  const auto topo = plan_topology(3, {"h:1", "h:2", "h:3"});
  CHECK(decode_topology(encode_topology(topo)) == topo);
  ShardStats s{1, 2, 3, 4, 5, 6, 7, 8};
  const Bytes b = encode_stats(s);
  CHECK(b.size() == 64);
  CHECK(b[0] == 1);
  CHECK(b[56] == 8);
  CHECK(decode_stats(b) == s);
  CHECK(thrown([&] { decode_stats(Bytes(b.begin(), b.begin() + 60)); }) != "none");
}

TEST_CASE("key lists")
{
  ByteWriter w;
  write_keys(w, {"a", "bc"});
  const Bytes b = std::move(w).take();
  CHECK(b == Bytes{2, 0, 1, 0, 'a', 2, 0, 'b', 'c'});
  ByteReader r(b);
  CHECK(read_keys(r) == std::vector<std::string>{"a", "bc"});
}

TEST_CASE("golden frames on disk match the encoder byte for byte")
{
  const auto frames = golden_frames();
  std::set<std::string> names;
  for (const auto& f : frames) {
    CAPTURE(f.name);
    names.insert(f.name);
    const auto path = kGoldenDir / (f.name + ".bin");
    REQUIRE(std::filesystem::exists(path));
    CHECK(read_file(path) == f.bytes);
  }
  // No stray files that no encoder produces.
  for (const auto& entry : std::filesystem::directory_iterator(kGoldenDir)) {
    if (entry.path().extension() == ".bin") {
      CHECK(names.count(entry.path().stem().string()) == 1);
    }
  }
}

TEST_CASE("golden frames decode to their documented contents")
{
  auto load = [](const std::string& n) { return read_file(kGoldenDir / (n + ".bin")); };

  // Tensor f32 [2,3] = 1..6, checked against hand-written bytes.
  const Bytes t = load("tensor_f32_2x3");
  const Bytes header = {1, 2, 2, 0, 0, 0, 3, 0, 0, 0};
  CHECK(Bytes(t.begin(), t.begin() + 10) == header);
  CHECK(deserialize_tensor(t).values<float>() == std::vector<float>{1, 2, 3, 4, 5, 6});
  CHECK(deserialize_tensor(load("tensor_i64_3")).values<int64_t>() == std::vector<int64_t>{-1, 0, 1});

  const Request put = decode_request(load("req_put_tensor"));
  CHECK(put.command == Command::put_tensor);
  CHECK(put.request_id == 1);
  ByteReader pr(put.body);
  CHECK(pr.str() == "foo");
  CHECK(deserialize_tensor(pr.rest()) == deserialize_tensor(t));

  const Response get = decode_response(load("resp_get_tensor"));
  CHECK(get.status == Status::ok);
  CHECK(get.body == t);

  const Response nf = decode_response(load("resp_get_tensor_not_found"));
  CHECK(nf.status == Status::not_found);

  try {
    raise(decode_response(load("resp_get_tensor_wrong_shard")));
  }
  catch (const Error& e) {
    CHECK(e.code() == ErrorCode::WrongShard);
    CHECK(e.owner() == 1);
  }

  const Request sm = decode_request(load("req_set_model"));
  ByteReader smr(sm.body);
  CHECK(smr.str() == "double_plus_one");
  CHECK(smr.u32() == 4);
  CHECK(smr.str() == "cpu");

  const Request rm = decode_request(load("req_run_model"));
  ByteReader rmr(rm.body);
  CHECK(rmr.str() == "double_plus_one");
  CHECK(read_keys(rmr) == std::vector<std::string>{"x"});
  CHECK(read_keys(rmr) == std::vector<std::string>{"y"});

  const Response slots = decode_response(load("resp_cluster_slots"));
  const auto topo = decode_topology(slots.body);
  REQUIRE(topo.size() == 2);
  CHECK(topo.shards()[0].hi == 8191);
  CHECK(topo.shards()[1].address == "127.0.0.1:7001");

  const ShardStats st = decode_stats(decode_response(load("resp_info")).body);
  CHECK(st == ShardStats{1, 2, 3, 4, 5, 6, 7, 8});

  const Bytes ping = load("req_ping");
  CHECK(ping == Bytes{11, 0, 0, 0, 1, 0, 0x0B, 13, 0, 0, 0});

  const Dataset ds = deserialize_dataset(decode_response(load("resp_get_dataset")).body, "golden_ds");
  CHECK(ds.get_tensor("x") == deserialize_tensor(load("tensor_i64_3")));
  CHECK(std::get<std::vector<double>>(ds.get_meta("dt").values) == std::vector<double>{0.5});
}
