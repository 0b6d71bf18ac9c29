#include "orca/process.h"

#include <fcntl.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "orca/error.h"

extern char** environ;

namespace orca::proc {

namespace {

ExitStatus
decode(int status)
{
  ExitStatus s;
  if (WIFSIGNALED(status)) {
    s.signaled = true;
    s.code = WTERMSIG(status);
  } else {
    s.code = WEXITSTATUS(status);
  }
  return s;
}

}  // namespace

pid_t
spawn(const SpawnSpec& spec)
{
  if (spec.exe.empty()) {
    throw Error(ErrorCode::SpawnFailed, "empty executable");
  }
  // Everything the child needs is built before fork(); the child only makes
  // async-signal-safe calls.
  std::vector<std::string> argv_store{spec.exe};
  argv_store.insert(argv_store.end(), spec.args.begin(), spec.args.end());
  std::vector<char*> argv;
  for (auto& a : argv_store) argv.push_back(a.data());
  argv.push_back(nullptr);

  std::map<std::string, std::string> env_map;
  for (char** e = environ; *e != nullptr; ++e) {
    const std::string kv(*e);
    const size_t eq = kv.find('=');
    if (eq != std::string::npos) env_map[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  for (const auto& [k, v] : spec.env) env_map[k] = v;
  std::vector<std::string> env_store;
  for (const auto& [k, v] : env_map) env_store.push_back(k + "=" + v);
  std::vector<char*> envp;
  for (auto& e : env_store) envp.push_back(e.data());
  envp.push_back(nullptr);

  const std::string cwd = spec.cwd.string();
  const std::string out = spec.stdout_path.string();
  const std::string err = spec.stderr_path.string();

  int pipefd[2];
  if (pipe2(pipefd, O_CLOEXEC) != 0) {
    throw Error(ErrorCode::SpawnFailed, std::string("pipe: ") + std::strerror(errno));
  }
  const pid_t pid = fork();
  if (pid < 0) {
    close(pipefd[0]);
    close(pipefd[1]);
    throw Error(ErrorCode::SpawnFailed, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    close(pipefd[0]);
    int stage = 0;
    if (!cwd.empty() && chdir(cwd.c_str()) != 0) goto fail;
    stage = 1;
    if (!out.empty()) {
      const int fd = open(out.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (fd < 0 || dup2(fd, STDOUT_FILENO) < 0) goto fail;
      close(fd);
    }
    if (!err.empty()) {
      const int fd = open(err.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (fd < 0 || dup2(fd, STDERR_FILENO) < 0) goto fail;
      close(fd);
    }
    stage = 2;
    execvpe(argv[0], argv.data(), envp.data());
  fail:
    const int payload[2] = {stage, errno};
    [[maybe_unused]] auto n = write(pipefd[1], payload, sizeof(payload));
    _exit(127);
  }
  close(pipefd[1]);
  int payload[2];
  ssize_t n;
  do {
    n = read(pipefd[0], payload, sizeof(payload));
  } while (n < 0 && errno == EINTR);
  close(pipefd[0]);
  if (n == static_cast<ssize_t>(sizeof(payload))) {
    int status = 0;
    waitpid(pid, &status, 0);
    static const char* const kStage[] = {"chdir", "redirect", "exec"};
    throw Error(
        ErrorCode::SpawnFailed, std::string(kStage[payload[0]]) + " '" + spec.exe +
                                    "': " + std::strerror(payload[1]));
  }
  return pid;
}

std::optional<ExitStatus>
try_wait(pid_t pid)
{
  int status = 0;
  pid_t r;
  do {
    r = waitpid(pid, &status, WNOHANG);
  } while (r < 0 && errno == EINTR);
  if (r == 0) {
    return std::nullopt;
  }
  if (r < 0) {
    // Already reaped or not our child.
    return ExitStatus{-1, false};
  }
  return decode(status);
}

ExitStatus
wait(pid_t pid)
{
  int status = 0;
  pid_t r;
  do {
    r = waitpid(pid, &status, 0);
  } while (r < 0 && errno == EINTR);
  if (r < 0) {
    return ExitStatus{-1, false};
  }
  return decode(status);
}

ExitStatus
terminate(pid_t pid, std::chrono::milliseconds grace)
{
  if (auto s = try_wait(pid)) {
    return *s;
  }
  kill(pid, SIGTERM);
  const auto deadline = std::chrono::steady_clock::now() + grace;
  while (std::chrono::steady_clock::now() < deadline) {
    if (auto s = try_wait(pid)) {
      return *s;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  kill(pid, SIGKILL);
  return wait(pid);
}

bool
alive(pid_t pid)
{
  return pid > 0 && (kill(pid, 0) == 0 || errno == EPERM);
}

std::filesystem::path
self_dir()
{
  std::error_code ec;
  const auto exe = std::filesystem::read_symlink("/proc/self/exe", ec);
  return ec ? std::filesystem::current_path() : exe.parent_path();
}

}  // namespace orca::proc
