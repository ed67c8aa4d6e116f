#pragma once

#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "slp/error.hpp"
#include "slp/feature_field.hpp"
#include "slp/segmenter.hpp"

namespace slp {

/// Run lengths alternating 0s and 1s, starting with 0s, over the row-major bits.
inline std::vector<std::uint64_t> rle_encode(const BinaryMask& mask) {
  std::vector<std::uint64_t> runs;
  bool current = false;
  std::uint64_t run = 0;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const bool bit = mask.test_index(i);
    if (bit != current) {
      runs.push_back(run);
      run = 0;
      current = bit;
    }
    ++run;
  }
  runs.push_back(run);
  return runs;
}

inline BinaryMask rle_decode(const std::vector<std::uint64_t>& runs, int height, int width) {
  BinaryMask mask(width, height);
  std::uint64_t pos = 0;
  bool bit = false;
  for (auto run : runs) {
    if (pos + run > mask.size()) throw IoError("rle: runs exceed H*W");
    if (bit)
      for (std::uint64_t i = 0; i < run; ++i) mask.set_index(pos + i);
    pos += run;
    bit = !bit;
  }
  if (pos != mask.size()) throw IoError("rle: runs sum to " + std::to_string(pos) + ", expected " + std::to_string(mask.size()));
  return mask;
}

/// A request/response line channel to a mask server.
class MaskChannel {
 public:
  virtual ~MaskChannel() = default;
  /// Sends one request line (no trailing newline) and returns the response line.
  virtual std::string exchange(const std::string& request) = 0;
};

/// Spawns `/bin/sh -c command` and speaks newline-delimited JSON over its stdio.
class ProcessChannel final : public MaskChannel {
 public:
  explicit ProcessChannel(const std::string& command) {
    // a dead server must surface as a write error, not a signal
    std::signal(SIGPIPE, SIG_IGN);
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0) throw IoError("pipe failed");
    if (pipe(from_child) != 0) {
      close(to_child[0]);
      close(to_child[1]);
      throw IoError("pipe failed");
    }
    pid_ = fork();
    if (pid_ < 0) throw IoError("fork failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    to_ = fdopen(to_child[1], "w");
    from_ = fdopen(from_child[0], "r");
    if (!to_ || !from_) throw IoError("fdopen failed");
  }

  ~ProcessChannel() override {
    if (to_) std::fclose(to_);
    if (from_) std::fclose(from_);
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
    }
  }

  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;

  std::string exchange(const std::string& request) override {
    if (std::fputs(request.c_str(), to_) == EOF || std::fputc('\n', to_) == EOF || std::fflush(to_) != 0)
      throw IoError("mask server: write failed");
    std::string line;
    for (int c = std::fgetc(from_); c != EOF && c != '\n'; c = std::fgetc(from_)) line.push_back(static_cast<char>(c));
    if (line.empty() && std::feof(from_)) throw IoError("mask server closed its output");
    return line;
  }

 private:
  pid_t pid_ = -1;
  std::FILE* to_ = nullptr;
  std::FILE* from_ = nullptr;
};

/// Segmenter backed by precomputed `SLPE` embeddings and a remote mask server.
/// One request is outstanding at a time; calls are serialized internally.
class StreamSegmenter final : public Segmenter {
 public:
  StreamSegmenter(std::vector<FrameId> frames, int width, int height, std::unique_ptr<MaskChannel> channel,
                  std::map<FrameId, std::filesystem::path> embeddings = {})
      : frames_(std::move(frames)),
        width_(width),
        height_(height),
        channel_(std::move(channel)),
        embeddings_(std::move(embeddings)) {
    require(width > 0 && height > 0, "StreamSegmenter: dimensions must be positive");
    require(channel_ != nullptr, "StreamSegmenter: no channel");
  }

  [[nodiscard]] std::vector<FrameId> frames() const override { return frames_; }
  [[nodiscard]] int width() const override { return width_; }
  [[nodiscard]] int height() const override { return height_; }

  [[nodiscard]] FeatureField encode_image(FrameId frame) const override {
    check_frame(frame);
    std::filesystem::path path;
    if (const auto it = embeddings_.find(frame); it != embeddings_.end()) {
      path = it->second;
    } else {
      const auto response = call({{"op", "encode"}, {"frame", frame}});
      if (!response.contains("path") || !response["path"].is_string())
        throw IoError("mask server: encode response without path");
      path = response["path"].get<std::string>();
    }
    FeatureField field = read_slpe(path);
    if (field.width() != width_ || field.height() != height_)
      throw IoError(path.string() + ": embedding dimensions differ from frame");
    return field;
  }

  [[nodiscard]] BinaryMask get_mask(FrameId frame, const Prompt& prompt) const override {
    check_frame(frame);
    check_prompt(prompt);
    nlohmann::json points = nlohmann::json::array();
    for (const Pixel& p : prompt.points) points.push_back({p.x, p.y});
    const auto response = call({{"op", "mask"}, {"frame", frame}, {"points", points}});
    try {
      const int h = response.at("h").get<int>();
      const int w = response.at("w").get<int>();
      if (h != height_ || w != width_) throw IoError("mask server: response dimensions differ from frame");
      return rle_decode(response.at("rle").get<std::vector<std::uint64_t>>(), h, w);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(std::string("mask server: malformed mask response: ") + e.what());
    }
  }

 private:
  void check_frame(FrameId frame) const {
    if (std::find(frames_.begin(), frames_.end(), frame) == frames_.end())
      throw NotFound("stream segmenter: unknown frame " + std::to_string(frame));
  }

  nlohmann::json call(nlohmann::json request) const {
    std::lock_guard lock(mutex_);
    const auto id = next_id_++;
    request["id"] = id;
    const std::string line = channel_->exchange(request.dump());
    nlohmann::json response;
    try {
      response = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw IoError(std::string("mask server: unparsable response: ") + e.what());
    }
    if (!response.is_object() || !response.contains("id") || response["id"] != id)
      throw IoError("mask server: response id does not match request " + std::to_string(id));
    if (response.contains("error")) throw IoError("mask server error: " + response["error"].dump());
    return response;
  }

  std::vector<FrameId> frames_;
  int width_;
  int height_;
  std::unique_ptr<MaskChannel> channel_;
  std::map<FrameId, std::filesystem::path> embeddings_;
  mutable std::mutex mutex_;
  mutable std::uint64_t next_id_ = 1;
};

}  // namespace slp
