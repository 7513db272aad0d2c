#pragma once

#include <chrono>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <sys/types.h>

namespace archloop {

using Environment = std::vector<std::pair<std::string, std::string>>;

// Child process started via `/bin/sh -c <command>` with pipes on stdin and
// stdout; stderr is inherited. The child is killed on destruction.
class ChildProcess {
 public:
  ChildProcess(const std::string& command, const Environment& extra_env = {});
  ChildProcess(const ChildProcess&) = delete;
  ChildProcess& operator=(const ChildProcess&) = delete;
  ~ChildProcess();

  /// False if the pipe is closed.
  bool write_all(const std::string& data);
  void close_stdin();

  /// One line without the trailing newline; nullopt on EOF or timeout.
  std::optional<std::string> read_line(std::chrono::milliseconds timeout);

  /// Reads stdout to EOF. nullopt on timeout.
  std::optional<std::string> read_all(std::chrono::milliseconds timeout);

  void kill();
  /// Exit status (or 128 + signal). Blocks.
  int wait();

  bool timed_out() const { return timed_out_; }

 private:
  pid_t pid_ = -1;
  int in_fd_ = -1;
  int out_fd_ = -1;
  std::string buffer_;
  bool eof_ = false;
  bool timed_out_ = false;
  std::optional<int> status_;

  bool fill(std::chrono::steady_clock::time_point deadline);
};

struct CommandResult {
  int exit_code = -1;
  bool timed_out = false;
  std::string out;
};

/// Runs `command` to completion, capturing stdout.
CommandResult run_command(const std::string& command, const Environment& extra_env,
                          std::chrono::milliseconds timeout);

}  // namespace archloop
