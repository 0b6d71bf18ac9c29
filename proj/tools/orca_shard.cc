// One shard process: serves its slot range of the topology file until
// SIGTERM or SIGINT.

#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "orca/error.h"
#include "orca/net.h"
#include "orca/routing.h"
#include "orca/shard.h"

int
main(int argc, char** argv)
{
  CLI::App app{"orca-shard: one shard of the in-memory tensor store"};
  std::string listen;
  uint32_t shard_id = 0;
  std::string topology_path;
  uint32_t workers = 1;
  bool serial = false;
  app.add_option("--listen", listen, "host:port to bind")->required();
  app.add_option("--shard-id", shard_id, "id of this shard in the topology")->required();
  app.add_option("--topology", topology_path, "topology file")->required();
  app.add_option("--workers", workers, "inference worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--serial-kernels", serial, "use the serial reference kernels");
  CLI11_PARSE(app, argc, argv);

  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGINT);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::signal(SIGPIPE, SIG_IGN);

  try {
    orca::ShardConfig config;
    config.shard_id = shard_id;
    config.topology = orca::read_topology_file(topology_path);
    config.workers = workers;
    config.kernels = serial ? orca::KernelPolicy::serial : orca::KernelPolicy::parallel;
    config.topology.shard(shard_id);

    const auto hp = orca::net::parse_address(listen);
    orca::ShardServer server(config, orca::net::Listener(hp.host, hp.port));
    server.start();
    std::cerr << "shard " << shard_id << " listening on " << server.address() << std::endl;

    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  }
  catch (const std::exception& e) {
    std::cerr << "orca-shard: " << e.what() << std::endl;
    return 1;
  }
  return 0;
}
