#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <json.hpp>
#include <thread>

#include "regtrack/backends.hpp"

namespace regtrack {

using nlohmann::json;

std::vector<std::string> shell_command(const std::string& command) {
  return {"/bin/sh", "-c", command};
}

ExternalBackend::ExternalBackend(std::vector<std::string> argv, std::chrono::milliseconds timeout)
    : argv_(std::move(argv)), timeout_(timeout) {
  if (argv_.empty()) {
    throw BackendError("external backend: empty command");
  }
  int fds[2];
  if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, fds) != 0) {
    throw BackendError(std::string("external backend: socketpair failed: ") + std::strerror(errno));
  }
  std::vector<char*> args;
  for (auto& a : argv_) {
    args.push_back(a.data());
  }
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw BackendError(std::string("external backend: fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    // Child: the socket end becomes both stdin and stdout.
    ::dup2(fds[1], STDIN_FILENO);
    ::dup2(fds[1], STDOUT_FILENO);
    ::execvp(args[0], args.data());
    ::_exit(127);
  }
  ::close(fds[1]);
  pid_ = pid;
  fd_ = fds[0];
}

ExternalBackend::~ExternalBackend() {
  if (fd_ >= 0) {
    ::close(fd_);
  }
  if (pid_ > 0) {
    // EOF on stdin asks the child to exit; give it a moment before killing.
    for (int i = 0; i < 50; ++i) {
      if (::waitpid(pid_, nullptr, WNOHANG) == pid_) {
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
  }
}

std::string ExternalBackend::identity() const {
  std::string id = "external:";
  for (std::size_t i = 0; i < argv_.size(); ++i) {
    id += (i ? " " : "") + argv_[i];
  }
  return id;
}

std::string ExternalBackend::exchange(const std::string& request) {
  if (broken_) {
    throw BackendError("external backend: channel unusable after an earlier failure");
  }
  const std::string line = request + '\n';
  std::size_t sent = 0;
  while (sent < line.size()) {
    const ssize_t n = ::send(fd_, line.data() + sent, line.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      broken_ = true;
      throw BackendError("external backend: child exited before reading request", request);
    }
    sent += static_cast<std::size_t>(n);
  }

  const auto deadline = std::chrono::steady_clock::now() + timeout_;
  while (true) {
    const auto nl = pending_.find('\n');
    if (nl != std::string::npos) {
      std::string response = pending_.substr(0, nl);
      pending_.erase(0, nl + 1);
      return response;
    }
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      broken_ = true;
      throw BackendError("external backend: timed out after " + std::to_string(timeout_.count()) +
                             " ms",
                         pending_);
    }
    pollfd pfd{fd_, POLLIN, 0};
    const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
    if (ready < 0 && errno == EINTR) {
      continue;
    }
    if (ready == 0) {
      continue;
    }
    char buf[4096];
    const ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n < 0 && errno == EINTR) {
      continue;
    }
    if (n <= 0) {
      broken_ = true;
      throw BackendError("external backend: child exited before responding", pending_);
    }
    pending_.append(buf, static_cast<std::size_t>(n));
  }
}

RegressionOutput ExternalBackend::decode(const std::string& line) const {
  RegressionOutput out;
  try {
    const json j = json::parse(line);
    for (const auto& b : j.at("boxes")) {
      if (!b.is_array() || b.size() != 4) {
        throw BackendError("external backend: box is not [x,y,w,h]", line);
      }
      out.boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(),
                           b[3].get<double>()});
    }
    for (const auto& s : j.at("scores")) {
      out.scores.push_back(s.get<double>());
    }
  } catch (const json::exception& e) {
    throw BackendError(std::string("external backend: malformed response: ") + e.what(), line);
  }
  if (out.boxes.size() != out.scores.size()) {
    throw BackendError("external backend: malformed response: " +
                           std::to_string(out.boxes.size()) + " boxes but " +
                           std::to_string(out.scores.size()) + " scores",
                       line);
  }
  return out;
}

RegressionOutput ExternalBackend::do_reg_and_class(FrameIndex frame,
                                                   std::span<const BoundingBox> boxes) {
  json req{{"op", "reg_and_class"}, {"frame", frame}, {"boxes", json::array()}};
  for (const auto& b : boxes) {
    req["boxes"].push_back({b.x, b.y, b.w, b.h});
  }
  const std::string line = exchange(req.dump());
  auto out = decode(line);
  if (out.boxes.size() != boxes.size()) {
    throw BackendError("external backend: malformed response: expected " +
                           std::to_string(boxes.size()) + " boxes, got " +
                           std::to_string(out.boxes.size()),
                       line);
  }
  return out;
}

std::vector<Detection> ExternalBackend::do_detect(FrameIndex frame) {
  const json req{{"op", "detect"}, {"frame", frame}};
  const auto out = decode(exchange(req.dump()));
  std::vector<Detection> dets;
  for (std::size_t i = 0; i < out.boxes.size(); ++i) {
    dets.push_back({out.boxes[i], out.scores[i]});
  }
  return dets;
}

}  // namespace regtrack
