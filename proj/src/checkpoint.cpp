// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The gridlmp Authors

#include "gridlmp/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "gridlmp/errors.hpp"

namespace gridlmp::nn {

namespace {
constexpr const char* kMagic = "gridlmp-checkpoint 1";
}

void save_checkpoint(const std::string& path,
                     const std::map<std::string, Matrix>& arrays) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write checkpoint: " + path);
  out << kMagic << "\n";
  char buf[32];
  for (const auto& [key, m] : arrays) {
    out << key << " " << m.rows() << " " << m.cols() << "\n";
    for (Index i = 0; i < m.rows(); ++i) {
      for (Index j = 0; j < m.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", m(i, j));
        out << buf << (j + 1 == m.cols() ? "" : " ");
      }
      out << "\n";
    }
  }
}

std::map<std::string, Matrix> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read checkpoint: " + path);
  std::string magic;
  std::getline(in, magic);
  if (magic != kMagic) throw Error("not a checkpoint file: " + path);
  std::map<std::string, Matrix> arrays;
  std::string key;
  Index rows = 0, cols = 0;
  while (in >> key >> rows >> cols) {
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i) {
      for (Index j = 0; j < cols; ++j) {
        if (!(in >> m(i, j))) throw Error("truncated checkpoint: " + path);
      }
    }
    arrays.emplace(key, std::move(m));
  }
  return arrays;
}

}  // namespace gridlmp::nn
