#include "flicker/nn/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "flicker/errors.hpp"

namespace flicker::nn {

namespace {

constexpr const char* kMagic = "flicker-ews-checkpoint";

std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

long long parse_int(const std::string& line, const std::string& key) {
  const std::string prefix = key + "=";
  if (line.rfind(prefix, 0) != 0)
    throw DataError("checkpoint: expected '" + key + "=', got: " + line);
  return std::stoll(line.substr(prefix.size()));
}

double parse_double(const std::string& line, const std::string& key) {
  const std::string prefix = key + "=";
  if (line.rfind(prefix, 0) != 0)
    throw DataError("checkpoint: expected '" + key + "=', got: " + line);
  return std::stod(line.substr(prefix.size()));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  if (ckpt.weights.size() != ckpt.arch.param_count())
    throw DataError("checkpoint: weight count does not match architecture");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);

  const auto& a = ckpt.arch;
  out << kMagic << " v" << ckpt.format_version << "\n"
      << "input_length=" << a.input_length << "\n"
      << "in_channels=" << a.in_channels << "\n"
      << "conv1_filters=" << a.conv1_filters << "\n"
      << "conv2_filters=" << a.conv2_filters << "\n"
      << "conv_kernel=" << a.conv_kernel << "\n"
      << "lstm1_cells=" << a.lstm1_cells << "\n"
      << "lstm2_cells=" << a.lstm2_cells << "\n"
      << "classes=" << a.classes << "\n"
      << "dropout_rate=" << fmt_g17(a.dropout_rate) << "\n"
      << "param_count=" << ckpt.weights.size() << "\n"
      << "history=" << ckpt.history.size() << "\n";
  for (std::size_t i = 0; i < ckpt.history.size(); ++i) {
    const auto& h = ckpt.history[i];
    out << "epoch" << (i + 1) << "=" << fmt_g17(h.loss) << " "
        << fmt_g17(h.accuracy) << " " << fmt_g17(h.val_loss) << " "
        << fmt_g17(h.val_accuracy) << "\n";
  }
  out << "payload=float32-le\n";
  out.write(reinterpret_cast<const char*>(ckpt.weights.data()),
            static_cast<std::streamsize>(ckpt.weights.size() * sizeof(float)));
  if (!out) throw DataError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);

  std::string line;
  auto next_line = [&]() -> std::string& {
    if (!std::getline(in, line))
      throw DataError("checkpoint truncated: " + path);
    return line;
  };

  next_line();
  std::string expected_magic = std::string(kMagic) + " v1";
  if (line != expected_magic)
    throw DataError("not a flicker-ews checkpoint (or unsupported version): " + path);

  Checkpoint ckpt;
  Architecture& a = ckpt.arch;
  a.input_length = static_cast<int>(parse_int(next_line(), "input_length"));
  a.in_channels = static_cast<int>(parse_int(next_line(), "in_channels"));
  a.conv1_filters = static_cast<int>(parse_int(next_line(), "conv1_filters"));
  a.conv2_filters = static_cast<int>(parse_int(next_line(), "conv2_filters"));
  a.conv_kernel = static_cast<int>(parse_int(next_line(), "conv_kernel"));
  a.lstm1_cells = static_cast<int>(parse_int(next_line(), "lstm1_cells"));
  a.lstm2_cells = static_cast<int>(parse_int(next_line(), "lstm2_cells"));
  a.classes = static_cast<int>(parse_int(next_line(), "classes"));
  a.dropout_rate = parse_double(next_line(), "dropout_rate");
  const auto param_count = static_cast<std::size_t>(parse_int(next_line(), "param_count"));
  if (param_count != a.param_count())
    throw DataError("checkpoint: param_count does not match architecture");

  const auto nhist = static_cast<std::size_t>(parse_int(next_line(), "history"));
  for (std::size_t i = 0; i < nhist; ++i) {
    std::ostringstream key;
    key << "epoch" << (i + 1);
    next_line();
    const std::string prefix = key.str() + "=";
    if (line.rfind(prefix, 0) != 0)
      throw DataError("checkpoint: malformed history line: " + line);
    std::istringstream vals(line.substr(prefix.size()));
    EpochStats h;
    if (!(vals >> h.loss >> h.accuracy >> h.val_loss >> h.val_accuracy))
      throw DataError("checkpoint: malformed history line: " + line);
    ckpt.history.push_back(h);
  }
  next_line();
  if (line != "payload=float32-le")
    throw DataError("checkpoint: unsupported payload marker: " + line);

  ckpt.weights.resize(param_count);
  in.read(reinterpret_cast<char*>(ckpt.weights.data()),
          static_cast<std::streamsize>(param_count * sizeof(float)));
  if (in.gcount() != static_cast<std::streamsize>(param_count * sizeof(float)))
    throw DataError("checkpoint payload truncated: " + path);
  return ckpt;
}

Net<float> to_net(const Checkpoint& ckpt) {
  Net<float> net(ckpt.arch);
  if (ckpt.weights.size() != net.layout.total)
    throw DataError("checkpoint: weight count does not match architecture");
  net.params = ckpt.weights;
  return net;
}

}  // namespace flicker::nn
