#include "tcp/process.hpp"

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "tcp/core.hpp"

namespace tcp {
namespace {

// Scratch file removed on scope exit; stdin and stderr go through files so a
// single pipe (stdout) can be drained without deadlock.
class TempFile {
 public:
  TempFile() {
    auto dir = std::filesystem::temp_directory_path() / "tcp-XXXXXX";
    std::string pattern = dir.string();
    int fd = ::mkstemp(pattern.data());
    if (fd < 0) throw Error(Errc::Io, "mkstemp failed");
    ::close(fd);
    path_ = pattern;
  }
  ~TempFile() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }
  TempFile(const TempFile&) = delete;
  TempFile& operator=(const TempFile&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::optional<std::string>& stdin_data,
                          const std::optional<std::filesystem::path>& cwd) {
  if (argv.empty()) throw Error(Errc::Io, "empty command");
  TempFile in_file;
  TempFile err_file;
  if (stdin_data) {
    std::ofstream f(in_file.path(), std::ios::binary);
    f << *stdin_data;
  }

  int pipefd[2];
  if (::pipe(pipefd) != 0) throw Error(Errc::Io, "pipe failed");

  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  pid_t pid = ::fork();
  if (pid < 0) throw Error(Errc::Io, "fork failed");
  if (pid == 0) {
    int in_fd = ::open(stdin_data ? in_file.path().c_str() : "/dev/null", O_RDONLY);
    int err_fd = ::open(err_file.path().c_str(), O_WRONLY | O_TRUNC);
    if (in_fd < 0 || err_fd < 0) ::_exit(127);
    ::dup2(in_fd, STDIN_FILENO);
    ::dup2(pipefd[1], STDOUT_FILENO);
    ::dup2(err_fd, STDERR_FILENO);
    ::close(pipefd[0]);
    ::close(pipefd[1]);
    if (cwd && ::chdir(cwd->c_str()) != 0) ::_exit(127);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }

  ::close(pipefd[1]);
  ProcessResult result;
  char buf[65536];
  for (;;) {
    ssize_t n = ::read(pipefd[0], buf, sizeof buf);
    if (n > 0) {
      result.out.append(buf, static_cast<std::size_t>(n));
    } else if (n == 0) {
      break;
    } else if (errno != EINTR) {
      break;
    }
  }
  ::close(pipefd[0]);

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.err = slurp(err_file.path());
  if (result.exit_code == 127 && result.out.empty())
    throw Error(Errc::Io, fmt::format("cannot run '{}': {}", argv[0], result.err));
  return result;
}

}  // namespace tcp
