#pragma once

#include <sys/types.h>

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace orca::proc {

struct SpawnSpec {
  std::string exe;  // looked up on PATH when it has no '/'
  std::vector<std::string> args;
  std::map<std::string, std::string> env;  // added to the inherited environment
  std::filesystem::path cwd;
  std::filesystem::path stdout_path;
  std::filesystem::path stderr_path;
};

struct ExitStatus {
  int code = 0;        // exit code, or the signal number when signaled
  bool signaled = false;
  bool success() const { return !signaled && code == 0; }
};

// Forks and execs; exec failures are reported synchronously as SpawnFailed.
pid_t spawn(const SpawnSpec& spec);

// nullopt while the child is still running.
std::optional<ExitStatus> try_wait(pid_t pid);
ExitStatus wait(pid_t pid);

// SIGTERM, then SIGKILL after `grace`; reaps the child.
ExitStatus terminate(pid_t pid, std::chrono::milliseconds grace = std::chrono::seconds(2));

// Works for non-children too (signal 0 probe).
bool alive(pid_t pid);

// Directory holding the running executable.
std::filesystem::path self_dir();

}  // namespace orca::proc
