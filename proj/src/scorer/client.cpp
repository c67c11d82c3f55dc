#include <fcntl.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <condition_variable>
#include <cstring>
#include <map>
#include <mutex>
#include <optional>
#include <thread>

#include <nlohmann/json.hpp>

#include "morphbert/scorer.hpp"

namespace morphbert::scorer {

namespace {

struct Pending {
  ScoreRequest request;
  std::int64_t caller_id = 0;
  std::promise<ScoreResponse> promise;
};

// Pulls the id out of a line that failed validation, if it has one.
std::optional<std::int64_t> salvage_id(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    if (j.is_object() && j.contains("id") && j["id"].is_number_integer()) {
      return j["id"].get<std::int64_t>();
    }
  } catch (const nlohmann::json::exception&) {
  }
  return std::nullopt;
}

}  // namespace

struct ScorerClient::Impl {
  ClientOptions options;
  pid_t pid = -1;
  int to_child = -1;
  int from_child = -1;
  std::thread reader;

  std::mutex write_mu;
  std::mutex mu;
  std::condition_variable ready_cv;
  bool handshake_done = false;
  std::size_t vocab_size = 0;
  std::exception_ptr failure;  // set once the client is unusable
  std::int64_t next_id = 1;
  std::map<std::int64_t, Pending> pending;

  void spawn(const std::vector<std::string>& argv);
  void read_loop();
  void handle_line(std::string_view line);
  void fail_all(std::exception_ptr error);
  void kill_child();
  void write_line(const std::string& line);

  ~Impl();
};

ScorerClient::Impl::~Impl() {
  if (to_child >= 0) close(to_child);
  if (pid > 0) {
    int status = 0;
    bool reaped = false;
    for (int i = 0; i < 200 && !reaped; ++i) {
      reaped = waitpid(pid, &status, WNOHANG) == pid;
      if (!reaped) std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    if (!reaped) {
      kill(pid, SIGKILL);
      waitpid(pid, &status, 0);
    }
  }
  if (reader.joinable()) reader.join();
  if (from_child >= 0) close(from_child);
}

void ScorerClient::Impl::spawn(const std::vector<std::string>& argv) {
  if (argv.empty()) throw ScorerDeadError("empty scorer command");
  int in_pair[2];
  int out_pair[2];
  if (socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, in_pair) != 0 ||
      socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, out_pair) != 0) {
    throw ScorerDeadError(std::string("socketpair: ") + std::strerror(errno));
  }
  std::vector<char*> cargv;
  for (const std::string& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  pid = fork();
  if (pid < 0) throw ScorerDeadError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    dup2(in_pair[1], STDIN_FILENO);
    dup2(out_pair[1], STDOUT_FILENO);
    execvp(cargv[0], cargv.data());
    _exit(127);
  }
  close(in_pair[1]);
  close(out_pair[1]);
  to_child = in_pair[0];
  from_child = out_pair[0];
}

void ScorerClient::Impl::write_line(const std::string& line) {
  std::lock_guard lock(write_mu);
  std::string buf = line + '\n';
  std::size_t off = 0;
  while (off < buf.size()) {
    const ssize_t n = send(to_child, buf.data() + off, buf.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw ScorerDeadError(std::string("writing to scorer: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

void ScorerClient::Impl::fail_all(std::exception_ptr error) {
  std::map<std::int64_t, Pending> doomed;
  {
    std::lock_guard lock(mu);
    if (!failure) failure = error;
    doomed.swap(pending);
    ready_cv.notify_all();
  }
  for (auto& [id, p] : doomed) p.promise.set_exception(error);
}

void ScorerClient::Impl::handle_line(std::string_view line) {
  {
    std::unique_lock lock(mu);
    if (!handshake_done) {
      try {
        vocab_size = parse_handshake(line).vocab_size;
        handshake_done = true;
        ready_cv.notify_all();
        return;
      } catch (const ProtocolError&) {
        lock.unlock();
        fail_all(std::current_exception());
        kill_child();
        return;
      }
    }
  }

  ScoreResponse response;
  std::exception_ptr error;
  std::optional<std::int64_t> id;
  try {
    response = parse_response(line);
    id = response.id;
  } catch (const ProtocolError&) {
    error = std::current_exception();
    id = salvage_id(line);
  }

  std::optional<Pending> owner;
  {
    std::lock_guard lock(mu);
    if (id) {
      if (auto it = pending.find(*id); it != pending.end()) {
        owner.emplace(std::move(it->second));
        pending.erase(it);
      }
    }
  }
  if (!owner) {
    // Nothing to pin the message on; the stream can no longer be trusted.
    fail_all(std::make_exception_ptr(ProtocolError(
        "unmatched scorer message: " + std::string(line.substr(0, 200)))));
    kill_child();
    return;
  }
  if (!error) {
    try {
      check_response(owner->request, response, vocab_size);
      response.id = owner->caller_id;
      owner->promise.set_value(std::move(response));
      return;
    } catch (const ProtocolError&) {
      error = std::current_exception();
    }
  }
  owner->promise.set_exception(error);
}

void ScorerClient::Impl::read_loop() {
  std::string buffer;
  char chunk[65536];
  while (true) {
    const ssize_t n = read(from_child, chunk, sizeof(chunk));
    if (n < 0 && errno == EINTR) continue;
    if (n <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(n));
    std::size_t start = 0;
    for (std::size_t nl; (nl = buffer.find('\n', start)) != std::string::npos; start = nl + 1) {
      std::string_view line(buffer.data() + start, nl - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      if (!line.empty()) handle_line(line);
    }
    buffer.erase(0, start);
  }
  fail_all(std::make_exception_ptr(ScorerDeadError("scorer closed its output")));
}

void ScorerClient::Impl::kill_child() {
  if (pid > 0) kill(pid, SIGKILL);
}

ScorerClient::ScorerClient(std::vector<std::string> argv, ClientOptions options)
    : impl_(std::make_unique<Impl>()) {
  impl_->options = options;
  impl_->spawn(argv);
  impl_->reader = std::thread([impl = impl_.get()] { impl->read_loop(); });

  std::unique_lock lock(impl_->mu);
  const bool woke = impl_->ready_cv.wait_for(lock, options.timeout, [&] {
    return impl_->handshake_done || impl_->failure;
  });
  if (impl_->handshake_done) return;
  std::exception_ptr error = impl_->failure;
  lock.unlock();
  if (!woke) {
    error = std::make_exception_ptr(ScorerDeadError("scorer sent no handshake within timeout"));
  }
  impl_->kill_child();
  impl_.reset();
  std::rethrow_exception(error ? error
                               : std::make_exception_ptr(ScorerDeadError("scorer failed to start")));
}

ScorerClient::~ScorerClient() = default;

std::size_t ScorerClient::vocab_size() const { return impl_->vocab_size; }

std::future<ScoreResponse> ScorerClient::submit(ScoreRequest request) {
  std::future<ScoreResponse> future;
  std::string line;
  {
    std::lock_guard lock(impl_->mu);
    if (impl_->failure) std::rethrow_exception(impl_->failure);
    const std::int64_t caller_id = request.id;
    request.id = impl_->next_id++;
    line = to_json_line(request);
    Pending p{std::move(request), caller_id, {}};
    future = p.promise.get_future();
    const std::int64_t wire_id = p.request.id;
    impl_->pending.emplace(wire_id, std::move(p));
  }
  try {
    impl_->write_line(line);
  } catch (const ScorerDeadError&) {
    impl_->fail_all(std::current_exception());
  }
  return future;
}

ScoreResponse ScorerClient::roundtrip(ScoreRequest request) {
  auto future = submit(std::move(request));
  if (future.wait_for(impl_->options.timeout) != std::future_status::ready) {
    impl_->kill_child();
    impl_->fail_all(std::make_exception_ptr(ScorerDeadError("scorer did not answer within timeout")));
  }
  return future.get();
}

ScoreResponse ProcessScorer::score(const ScoreRequest& request) {
  return client_.roundtrip(request);
}

}  // namespace morphbert::scorer
