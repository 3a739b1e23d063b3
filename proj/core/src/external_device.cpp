#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <sstream>

#include "smi/devices.hpp"

namespace smi {

ExternalDevice::ExternalDevice(std::string command, int k, int timeout_ms)
    : command_(std::move(command)), k_(k), timeout_ms_(timeout_ms) {
    if (k_ < 1) throw std::invalid_argument("ExternalDevice: k >= 1 required");
    if (command_.empty()) throw std::invalid_argument("ExternalDevice: empty command");
}

namespace {

struct Pipe {
    int fd[2] = {-1, -1};
    Pipe() {
        if (pipe(fd) != 0) throw DeviceError("pipe() failed");
    }
    ~Pipe() {
        close_read();
        close_write();
    }
    void close_read() {
        if (fd[0] >= 0) ::close(fd[0]);
        fd[0] = -1;
    }
    void close_write() {
        if (fd[1] >= 0) ::close(fd[1]);
        fd[1] = -1;
    }
};

void set_nonblock(int fd) { fcntl(fd, F_SETFL, fcntl(fd, F_GETFL) | O_NONBLOCK); }

}  // namespace

double ExternalDevice::evaluate(const Dataset& ds) const {
    // a closed child stdin must surface as an error, not kill the process
    static const int sigpipe_ignored = [] {
        ::signal(SIGPIPE, SIG_IGN);
        return 0;
    }();
    (void)sigpipe_ignored;

    std::ostringstream payload;
    write_csv(ds, payload);
    const std::string input = payload.str();

    Pipe in, out, err;
    const pid_t pid = fork();
    if (pid < 0) throw DeviceError("fork() failed");
    if (pid == 0) {
        dup2(in.fd[0], STDIN_FILENO);
        dup2(out.fd[1], STDOUT_FILENO);
        dup2(err.fd[1], STDERR_FILENO);
        in.close_read();
        in.close_write();
        out.close_read();
        out.close_write();
        err.close_read();
        err.close_write();
        execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
        _exit(127);
    }
    in.close_read();
    out.close_write();
    err.close_write();
    set_nonblock(in.fd[1]);
    set_nonblock(out.fd[0]);
    set_nonblock(err.fd[0]);

    std::string stdout_text, stderr_text;
    std::size_t written = 0;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
    bool timed_out = false;

    while (in.fd[1] >= 0 || out.fd[0] >= 0 || err.fd[0] >= 0) {
        struct pollfd fds[3];
        int nf = 0;
        int idx_in = -1, idx_out = -1, idx_err = -1;
        if (in.fd[1] >= 0) {
            idx_in = nf;
            fds[nf++] = {in.fd[1], POLLOUT, 0};
        }
        if (out.fd[0] >= 0) {
            idx_out = nf;
            fds[nf++] = {out.fd[0], POLLIN, 0};
        }
        if (err.fd[0] >= 0) {
            idx_err = nf;
            fds[nf++] = {err.fd[0], POLLIN, 0};
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                              deadline - std::chrono::steady_clock::now())
                              .count();
        if (left <= 0) {
            timed_out = true;
            break;
        }
        const int rc = poll(fds, static_cast<nfds_t>(nf), static_cast<int>(left));
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }
        if (rc == 0) {
            timed_out = true;
            break;
        }
        char buf[4096];
        if (idx_in >= 0 && (fds[idx_in].revents & (POLLOUT | POLLERR))) {
            const ssize_t w = write(in.fd[1], input.data() + written,
                                    std::min<std::size_t>(input.size() - written, sizeof(buf)));
            if (w > 0) written += static_cast<std::size_t>(w);
            if (w < 0 && errno != EAGAIN && errno != EINTR) in.close_write();
            if (written == input.size()) in.close_write();
        }
        if (idx_out >= 0 && (fds[idx_out].revents & (POLLIN | POLLHUP))) {
            const ssize_t r = read(out.fd[0], buf, sizeof(buf));
            if (r > 0)
                stdout_text.append(buf, static_cast<std::size_t>(r));
            else if (r == 0 || (r < 0 && errno != EAGAIN && errno != EINTR))
                out.close_read();
        }
        if (idx_err >= 0 && (fds[idx_err].revents & (POLLIN | POLLHUP))) {
            const ssize_t r = read(err.fd[0], buf, sizeof(buf));
            if (r > 0)
                stderr_text.append(buf, static_cast<std::size_t>(r));
            else if (r == 0 || (r < 0 && errno != EAGAIN && errno != EINTR))
                err.close_read();
        }
    }

    int status = 0;
    if (timed_out) {
        kill(pid, SIGKILL);
        waitpid(pid, &status, 0);
        throw DeviceError("external device timed out after " + std::to_string(timeout_ms_) + " ms");
    }
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        throw DeviceError("external device exited with status " + std::to_string(code) +
                          (stderr_text.empty() ? "" : ": " + stderr_text));
    }

    // expect exactly one real number (surrounding whitespace allowed)
    const char* s = stdout_text.c_str();
    char* end = nullptr;
    errno = 0;
    const double value = std::strtod(s, &end);
    if (end == s || errno == ERANGE)
        throw DeviceError("cannot parse external device output as a number: '" + stdout_text + "'");
    for (const char* q = end; *q; ++q)
        if (!std::isspace(static_cast<unsigned char>(*q)))
            throw DeviceError("trailing text after numeric output: '" + stdout_text + "'");
    return value;
}

}  // namespace smi
