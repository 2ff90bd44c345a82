// Copyright 2026 The sensfarm Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <string>
#include <utility>
#include <vector>

namespace sensfarm::svg {

std::string escape(const std::string& text);

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per series
};

struct BarPanel {
  std::string title;
  std::vector<std::string> series;
  std::vector<BarGroup> groups;
};

struct LineSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

struct LinePanel {
  std::string title;
  std::string x_label;
  std::vector<LineSeries> series;
};

// Panels stacked vertically in one document.
class Document {
 public:
  explicit Document(double width = 720.0) : width_(width) {}

  void add(const BarPanel& panel);
  void add(const LinePanel& panel);
  void add_note(const std::string& text);
  std::string str() const;

 private:
  double width_;
  double height_ = 10.0;
  std::string body_;
};

}  // namespace sensfarm::svg
