#include "orca/shard.h"

#include <condition_variable>

namespace orca {

const char*
entry_kind_name(EntryKind k)
{
  switch (k) {
    case EntryKind::tensor: return "tensor";
    case EntryKind::dataset: return "dataset";
    case EntryKind::model: return "model";
    case EntryKind::script: return "script";
  }
  return "?";
}

namespace {

// Engine failures surface to clients as ExecError with the engine's text.
[[noreturn]] void
rethrow_as_exec(const Error& e)
{
  throw Error(ErrorCode::ExecError, e.what());
}

}  // namespace

ShardCore::ShardCore(ShardConfig config) : config_(std::move(config))
{
  if (config_.topology.empty()) {
    throw Error(ErrorCode::BadTopology, "shard needs a topology");
  }
  config_.topology.shard(config_.shard_id);  // throws if absent
  queue_ = std::make_unique<InferenceQueue>(
      config_.workers, [this](std::vector<InferenceRequest>& batch) { execute(batch); });
}

ShardCore::~ShardCore()
{
  queue_->shutdown();
}

void
ShardCore::check_owned(const std::string& key) const
{
  const uint32_t owner = config_.topology.owner_of_key(key);
  if (owner != config_.shard_id) {
    throw Error(
        ErrorCode::WrongShard,
        "key '" + key + "' belongs to shard " + std::to_string(owner), owner);
  }
}

void
ShardCore::store(const std::string& key, Entry e)
{
  std::unique_lock lock(mu_);
  keyspace_.insert_or_assign(key, std::move(e));
}

ShardCore::Entry
ShardCore::lookup(const std::string& key) const
{
  std::shared_lock lock(mu_);
  auto it = keyspace_.find(key);
  if (it == keyspace_.end()) {
    throw Error(ErrorCode::NotFound, "key '" + key + "' not found");
  }
  return it->second;
}

void
ShardCore::put_tensor(const std::string& key, ByteSpan tensor_bytes)
{
  check_owned(key);
  try {
    deserialize_tensor(tensor_bytes);
  }
  catch (const Error& e) {
    throw Error(ErrorCode::Malformed, std::string("bad tensor: ") + e.what());
  }
  store(key, Entry{EntryKind::tensor, Bytes(tensor_bytes.begin(), tensor_bytes.end()), {}, {}});
  puts_++;
  bytes_in_ += tensor_bytes.size();
}

Bytes
ShardCore::get_tensor(const std::string& key)
{
  check_owned(key);
  Entry e = lookup(key);
  if (e.kind != EntryKind::tensor) {
    throw Error(
        ErrorCode::WrongKind, "key '" + key + "' holds a " + entry_kind_name(e.kind));
  }
  gets_++;
  bytes_out_ += e.blob.size();
  return std::move(e.blob);
}

bool
ShardCore::del(const std::string& key)
{
  check_owned(key);
  std::unique_lock lock(mu_);
  return keyspace_.erase(key) != 0;
}

void
ShardCore::put_dataset(const std::string& key, ByteSpan dataset_bytes)
{
  check_owned(key);
  try {
    deserialize_dataset(dataset_bytes, key);
  }
  catch (const Error& e) {
    throw Error(ErrorCode::Malformed, std::string("bad dataset: ") + e.what());
  }
  store(key, Entry{EntryKind::dataset, Bytes(dataset_bytes.begin(), dataset_bytes.end()), {}, {}});
  puts_++;
  bytes_in_ += dataset_bytes.size();
}

Bytes
ShardCore::get_dataset(const std::string& key)
{
  check_owned(key);
  Entry e = lookup(key);
  if (e.kind != EntryKind::dataset) {
    throw Error(
        ErrorCode::WrongKind, "key '" + key + "' holds a " + entry_kind_name(e.kind));
  }
  gets_++;
  bytes_out_ += e.blob.size();
  return std::move(e.blob);
}

void
ShardCore::set_model(
    const std::string& name, ByteSpan blob, uint32_t batch_size, const std::string& device)
{
  if (name.empty()) {
    throw Error(ErrorCode::BadModel, "model name must be non-empty");
  }
  if (device != "cpu" && device != "CPU") {
    throw Error(ErrorCode::BadModel, "unsupported device '" + device + "'");
  }
  auto spec = std::make_shared<ModelSpec>();
  try {
    *spec = load_model(blob);
  }
  catch (const Error& e) {
    throw Error(ErrorCode::BadModel, e.what());
  }
  spec->name = name;
  spec->batch_size = std::max<uint32_t>(batch_size, 1);
  spec->device = Device::cpu;
  store(name, Entry{EntryKind::model, {}, std::move(spec), {}});
}

Tensor
ShardCore::load_input(const std::string& key) const
{
  Entry e;
  try {
    e = lookup(key);
  }
  catch (const Error& err) {
    if (err.code() == ErrorCode::NotFound) {
      throw Error(ErrorCode::InputMissing, "input '" + key + "' not resident on this shard");
    }
    throw;
  }
  if (e.kind != EntryKind::tensor) {
    throw Error(
        ErrorCode::WrongKind, "input '" + key + "' holds a " + entry_kind_name(e.kind));
  }
  return deserialize_tensor(e.blob);
}

void
ShardCore::run_model(
    const std::string& name, const std::vector<std::string>& inputs,
    const std::vector<std::string>& outputs)
{
  std::shared_ptr<const ModelSpec> model;
  {
    std::shared_lock lock(mu_);
    auto it = keyspace_.find(name);
    if (it == keyspace_.end() || it->second.kind != EntryKind::model) {
      throw Error(ErrorCode::ModelNotFound, "no model '" + name + "'");
    }
    model = it->second.model;
  }
  if (inputs.empty()) {
    throw Error(ErrorCode::Malformed, "run_model needs at least one input key");
  }
  if (outputs.size() != 1) {
    throw Error(ErrorCode::Malformed, "run_model produces exactly one output key");
  }
  for (const auto& k : outputs) {
    check_owned(k);
  }

  std::vector<Tensor> tensors;
  for (const auto& k : inputs) {
    tensors.push_back(load_input(k));
  }

  // Inputs are concatenated along their last axis into one [rows x width]
  // batch; 1-D inputs count as a single row.
  const bool vector_input = tensors[0].ndim() == 1;
  InferenceRequest req;
  try {
    uint32_t rows = 0;
    uint32_t width = 0;
    for (const auto& t : tensors) {
      if (t.dtype() != DType::f32) {
        throw Error(
            ErrorCode::DTypeMismatch,
            std::string("model input must be f32, got ") + dtype_name(t.dtype()));
      }
      if (t.ndim() > 2 || (t.ndim() == 1) != vector_input) {
        throw Error(ErrorCode::WidthMismatch, "model inputs must all be 1-D or all 2-D");
      }
      const uint32_t r = vector_input ? 1 : t.shape()[0];
      if (rows != 0 && r != rows) {
        throw Error(ErrorCode::WidthMismatch, "model inputs disagree on row count");
      }
      rows = r;
      width += t.shape().back();
    }
    Bytes joined;
    if (tensors.size() == 1) {
      joined.assign(tensors[0].data().begin(), tensors[0].data().end());
    } else {
      joined.reserve(static_cast<size_t>(rows) * width * sizeof(float));
      for (uint32_t r = 0; r < rows; ++r) {
        for (const auto& t : tensors) {
          const size_t row_bytes = t.shape().back() * sizeof(float);
          const auto begin = t.data().begin() + static_cast<long>(r * row_bytes);
          joined.insert(joined.end(), begin, begin + static_cast<long>(row_bytes));
        }
      }
    }
    req.input = Tensor(DType::f32, {rows, width}, std::move(joined));
    check_model_input(*model, req.input);
  }
  catch (const Error& e) {
    rethrow_as_exec(e);
  }
  req.model = model;
  req.vector_output = vector_input;
  req.output_keys = outputs;
  auto done = queue_->submit(std::move(req));
  done.get();
}

void
ShardCore::execute(std::vector<InferenceRequest>& batch)
{
  if (batch.empty()) {
    return;
  }
  std::vector<Tensor> inputs;
  inputs.reserve(batch.size());
  for (const auto& r : batch) {
    inputs.push_back(r.input);
  }
  std::vector<Tensor> outputs;
  try {
    outputs = execute_batch(*batch.front().model, inputs, config_.kernels);
  }
  catch (const Error& e) {
    // One failing engine call fails every member of the batch.
    batch_executions_++;
    model_runs_ += batch.size();
    const auto err = std::make_exception_ptr(Error(ErrorCode::ExecError, e.what()));
    for (auto& r : batch) {
      r.done.set_exception(err);
    }
    return;
  }
  for (size_t i = 0; i < batch.size(); ++i) {
    Tensor out = std::move(outputs[i]);
    if (batch[i].vector_output) {
      out = Tensor(DType::f32, {out.shape()[1]}, Bytes(out.data().begin(), out.data().end()));
    }
    store(batch[i].output_keys[0], Entry{EntryKind::tensor, serialize_tensor(out), {}, {}});
  }
  batch_executions_++;
  model_runs_ += batch.size();
  for (auto& r : batch) {
    r.done.set_value();
  }
}

void
ShardCore::set_script(const std::string& name, const std::string& text)
{
  if (name.empty()) {
    throw Error(ErrorCode::BadScript, "script name must be non-empty");
  }
  auto spec = std::make_shared<ScriptSpec>(parse_script(text));
  spec->name = name;
  store(name, Entry{EntryKind::script, {}, {}, std::move(spec)});
}

void
ShardCore::run_script(
    const std::string& name, const std::vector<std::string>& inputs,
    const std::string& output)
{
  std::shared_ptr<const ScriptSpec> script;
  {
    std::shared_lock lock(mu_);
    auto it = keyspace_.find(name);
    if (it == keyspace_.end() || it->second.kind != EntryKind::script) {
      throw Error(ErrorCode::NotFound, "no script '" + name + "'");
    }
    script = it->second.script;
  }
  check_owned(output);
  std::vector<Tensor> tensors;
  for (const auto& k : inputs) {
    tensors.push_back(load_input(k));
  }
  Tensor out;
  try {
    out = run_script_exec(*script, tensors);
  }
  catch (const Error& e) {
    rethrow_as_exec(e);
  }
  store(output, Entry{EntryKind::tensor, serialize_tensor(out), {}, {}});
  script_runs_++;
}

std::vector<std::string>
ShardCore::keys() const
{
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  out.reserve(keyspace_.size());
  for (const auto& [k, e] : keyspace_) {
    out.push_back(k);
  }
  return out;
}

ShardStats
ShardCore::info() const
{
  ShardStats s;
  s.puts = puts_;
  s.gets = gets_;
  s.model_runs = model_runs_;
  s.script_runs = script_runs_;
  s.batch_executions = batch_executions_;
  s.bytes_in = bytes_in_;
  s.bytes_out = bytes_out_;
  std::shared_lock lock(mu_);
  s.keys_resident = keyspace_.size();
  return s;
}

wire::Response
ShardCore::dispatch(const wire::Request& req)
{
  using wire::Command;
  wire::Response resp;
  resp.command = req.command;
  resp.request_id = req.request_id;
  try {
    if (req.version != wire::kVersion) {
      throw Error(
          ErrorCode::Malformed, "unsupported protocol version " + std::to_string(req.version));
    }
    ByteReader in(req.body, ErrorCode::Malformed);
    ByteWriter out;
    switch (req.command) {
      case Command::put_tensor: {
        const std::string key = in.str();
        put_tensor(key, in.rest());
        break;
      }
      case Command::get_tensor: {
        const std::string key = in.str();
        out.raw(get_tensor(key));
        break;
      }
      case Command::del: {
        const std::string key = in.str();
        out.u8(del(key) ? 1 : 0);
        break;
      }
      case Command::put_dataset: {
        const std::string key = in.str();
        put_dataset(key, in.rest());
        break;
      }
      case Command::get_dataset: {
        const std::string key = in.str();
        out.raw(get_dataset(key));
        break;
      }
      case Command::set_model: {
        const std::string name = in.str();
        const uint32_t batch = in.u32();
        const std::string device = in.str();
        set_model(name, in.rest(), batch, device);
        break;
      }
      case Command::run_model: {
        const std::string name = in.str();
        const auto inputs = wire::read_keys(in);
        const auto outputs = wire::read_keys(in);
        run_model(name, inputs, outputs);
        break;
      }
      case Command::set_script: {
        const std::string name = in.str();
        const ByteSpan text = in.rest();
        set_script(name, std::string(text.begin(), text.end()));
        break;
      }
      case Command::run_script: {
        const std::string name = in.str();
        const auto inputs = wire::read_keys(in);
        const std::string output = in.str();
        run_script(name, inputs, output);
        break;
      }
      case Command::cluster_slots:
        out.raw(wire::encode_topology(config_.topology));
        break;
      case Command::ping:
        out.str("PONG");
        break;
      case Command::info:
        out.raw(wire::encode_stats(info()));
        break;
    }
    resp.body = std::move(out).take();
  }
  catch (const Error& e) {
    return wire::error_response(req, e);
  }
  catch (const std::exception& e) {
    return wire::error_response(req, Error(ErrorCode::ExecError, e.what()));
  }
  return resp;
}

ShardServer::ShardServer(ShardConfig config, net::Listener listener)
    : core_(std::move(config)), listener_(std::move(listener))
{
}

ShardServer::~ShardServer()
{
  stop();
}

void
ShardServer::start()
{
  acceptor_ = std::thread([this] { accept_loop(); });
}

void
ShardServer::accept_loop()
{
  while (!stopping_) {
    net::Socket s = listener_.accept();
    if (!s.valid()) {
      if (stopping_) {
        return;
      }
      continue;
    }
    reap_finished();
    std::lock_guard<std::mutex> lock(conn_mu_);
    if (stopping_) {
      return;
    }
    auto conn = std::make_unique<Connection>();
    conn->socket = std::move(s);
    Connection* raw = conn.get();
    conns_.push_back(std::move(conn));
    raw->thread = std::thread([this, raw] { serve(raw); });
  }
}

void
ShardServer::serve(Connection* conn)
{
  try {
    for (;;) {
      auto frame = conn->socket.read_frame(wire::kMaxFrame);
      if (!frame) {
        break;
      }
      wire::Response resp;
      try {
        resp = core_.dispatch(wire::decode_request(*frame));
      }
      catch (const Error& e) {
        // Undecodable header: answer with whatever id we can recover.
        wire::Request stub;
        if (frame->size() >= wire::kRequestHeader) {
          ByteReader in(*frame, ErrorCode::Malformed);
          in.u32();
          in.u16();
          const uint8_t c = in.u8();
          stub.command = wire::is_command(c) ? static_cast<wire::Command>(c) : wire::Command::ping;
          stub.request_id = in.u32();
        }
        resp = wire::error_response(stub, e);
      }
      conn->socket.write_all(wire::encode_response(resp));
    }
  }
  catch (const std::exception&) {
    // Connection-level failure; drop the connection.
  }
  conn->finished = true;
}

void
ShardServer::reap_finished()
{
  std::lock_guard<std::mutex> lock(conn_mu_);
  for (auto it = conns_.begin(); it != conns_.end();) {
    if ((*it)->finished) {
      (*it)->thread.join();
      it = conns_.erase(it);
    } else {
      ++it;
    }
  }
}

void
ShardServer::stop()
{
  if (stopping_.exchange(true)) {
    return;
  }
  listener_.shutdown();
  if (acceptor_.joinable()) {
    acceptor_.join();
  }
  {
    std::lock_guard<std::mutex> lock(conn_mu_);
    for (auto& c : conns_) {
      c->socket.shutdown();
    }
  }
  for (auto& c : conns_) {
    if (c->thread.joinable()) {
      c->thread.join();
    }
  }
  conns_.clear();
  {
    std::lock_guard<std::mutex> lock(stop_mu_);
    stopped_ = true;
  }
  stop_cv_.notify_all();
}

void
ShardServer::wait()
{
  std::unique_lock<std::mutex> lock(stop_mu_);
  stop_cv_.wait(lock, [this] { return stopped_; });
}

}  // namespace orca
