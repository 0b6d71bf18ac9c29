// Writes the canonical protocol frames to a directory (protocol/golden/).

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "orca/golden.h"

int
main(int argc, char** argv)
{
  CLI::App app{"golden-frames: write canonical wire frames"};
  std::string out = "protocol/golden";
  app.add_option("dir", out, "output directory");
  CLI11_PARSE(app, argc, argv);

  std::filesystem::create_directories(out);
  for (const auto& f : orca::wire::golden_frames()) {
    std::ofstream file(std::filesystem::path(out) / (f.name + ".bin"), std::ios::binary);
    file.write(reinterpret_cast<const char*>(f.bytes.data()), static_cast<std::streamsize>(f.bytes.size()));
    if (!file) {
      std::cerr << "cannot write " << f.name << std::endl;
      return 1;
    }
  }
  return 0;
}
