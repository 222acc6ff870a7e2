#include "pageseg/subprocess.hpp"

#include "pageseg/errors.hpp"

#include <spawn.h>
#include <sys/wait.h>

#include <cerrno>
#include <cstring>

extern char** environ;

namespace pageseg {

int run_command(const std::vector<std::string>& argv) {
    if (argv.empty()) throw PredictorError("empty predictor command");
    std::vector<char*> args;
    args.reserve(argv.size() + 1);
    for (const std::string& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);

    pid_t pid = -1;
    const int rc = posix_spawnp(&pid, args[0], nullptr, nullptr, args.data(),
                                environ);
    if (rc != 0)
        throw PredictorError("cannot spawn '" + argv[0] +
                             "': " + std::strerror(rc));
    int status = 0;
    while (waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR)
            throw PredictorError("waitpid failed for '" + argv[0] +
                                 "': " + std::strerror(errno));
    }
    if (WIFEXITED(status)) return WEXITSTATUS(status);
    if (WIFSIGNALED(status)) return 128 + WTERMSIG(status);
    return -1;
}

std::vector<std::string> split_command(std::string_view command) {
    std::vector<std::string> parts;
    std::size_t i = 0;
    while (i < command.size()) {
        while (i < command.size() && (command[i] == ' ' || command[i] == '\t')) ++i;
        std::size_t start = i;
        while (i < command.size() && command[i] != ' ' && command[i] != '\t') ++i;
        if (i > start) parts.emplace_back(command.substr(start, i - start));
    }
    return parts;
}

} // namespace pageseg
