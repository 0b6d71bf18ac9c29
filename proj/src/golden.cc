#include "orca/golden.h"

#include "orca/protocol.h"
#include "orca/routing.h"
#include "orca/tensor.h"

namespace orca::wire {

namespace {

Bytes
req(Command c, uint32_t id, Bytes body)
{
  return encode_request(Request{kVersion, c, id, std::move(body)});
}

Bytes
resp(Command c, uint32_t id, Status s, Bytes body = {})
{
  return encode_response(Response{kVersion, c, id, s, std::move(body)});
}

Bytes
str_body(const std::string& msg)
{
  ByteWriter w;
  w.str(msg);
  return std::move(w).take();
}

}  // namespace

std::vector<GoldenFrame>
golden_frames()
{
  // f32 [2,3] = 1..6 and i64 [3] = {-1, 0, 1}.
  const Tensor f32 = Tensor::from_values<float>({2, 3}, std::vector<float>{1, 2, 3, 4, 5, 6});
  const Tensor i64 = Tensor::from_values<int64_t>({3}, std::vector<int64_t>{-1, 0, 1});
  const Bytes f32_bytes = serialize_tensor(f32);
  const Bytes i64_bytes = serialize_tensor(i64);

  Dataset ds("golden_ds");
  ds.add_tensor("x", i64);
  ds.add_meta_scalar("dt", 0.5);
  ds.add_meta_string("tags", "a");
  const Bytes ds_bytes = serialize_dataset(ds);

  // Dense(1 -> 1, W = [[2]], b = [1]).
  const Bytes model = {'S', 'S', 'N', 'N', 1, 0, 1, 0, 1, 1, 0, 0, 0, 1, 0, 0, 0,
                       0, 0, 0, 0x40, 0, 0, 0x80, 0x3F};
  const std::string script = R"({"name":"golden_ln","arity":1,"steps":[{"op":"ln"}]})";

  const ClusterTopology topo = plan_topology(2, {"127.0.0.1:7000", "127.0.0.1:7001"});
  ShardStats stats;
  stats.puts = 1;
  stats.gets = 2;
  stats.model_runs = 3;
  stats.script_runs = 4;
  stats.batch_executions = 5;
  stats.bytes_in = 6;
  stats.bytes_out = 7;
  stats.keys_resident = 8;

  ByteWriter wrong;
  wrong.u32(1);
  wrong.str("key 'foo' belongs to shard 1");

  return {
      {"req_put_tensor", req(Command::put_tensor, 1, put_tensor_body("foo", f32_bytes))},
      {"resp_put_tensor", resp(Command::put_tensor, 1, Status::ok)},
      {"req_get_tensor", req(Command::get_tensor, 2, key_body("foo"))},
      {"resp_get_tensor", resp(Command::get_tensor, 2, Status::ok, f32_bytes)},
      {"resp_get_tensor_not_found",
       resp(Command::get_tensor, 3, Status::not_found, str_body("no key 'bar'"))},
      {"resp_get_tensor_wrong_shard",
       resp(Command::get_tensor, 4, Status::wrong_shard, std::move(wrong).take())},
      {"req_del", req(Command::del, 5, key_body("foo"))},
      {"resp_del", resp(Command::del, 5, Status::ok, Bytes{1})},
      {"req_put_dataset", req(Command::put_dataset, 6, put_dataset_body("golden_ds", ds_bytes))},
      {"req_get_dataset", req(Command::get_dataset, 7, key_body("golden_ds"))},
      {"resp_get_dataset", resp(Command::get_dataset, 7, Status::ok, ds_bytes)},
      {"req_set_model", req(Command::set_model, 8, set_model_body("double_plus_one", 4, "cpu", model))},
      {"resp_set_model", resp(Command::set_model, 8, Status::ok)},
      {"req_run_model", req(Command::run_model, 9, run_model_body("double_plus_one", {"x"}, {"y"}))},
      {"resp_run_model", resp(Command::run_model, 9, Status::ok)},
      {"req_set_script", req(Command::set_script, 10, set_script_body("golden_ln", script))},
      {"req_run_script", req(Command::run_script, 11, run_script_body("golden_ln", {"x"}, "y"))},
      {"req_cluster_slots", req(Command::cluster_slots, 12, {})},
      {"resp_cluster_slots", resp(Command::cluster_slots, 12, Status::ok, encode_topology(topo))},
      {"req_ping", req(Command::ping, 13, {})},
      {"resp_ping", resp(Command::ping, 13, Status::ok, str_body("PONG"))},
      {"req_info", req(Command::info, 14, {})},
      {"resp_info", resp(Command::info, 14, Status::ok, encode_stats(stats))},
      {"tensor_f32_2x3", f32_bytes},
      {"tensor_i64_3", i64_bytes},
  };
}

}  // namespace orca::wire
