/* Copyright 2026 The crossmatch Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// Subcommands of the crossmatch command-line tool.

#ifndef CROSSMATCH_TOOLS_COMMANDS_H_
#define CROSSMATCH_TOOLS_COMMANDS_H_

#include "CLI11.hpp"

namespace crossmatch::cli {

// Adds featurize, stats, fit-pca, fit-cca, train, match, retrieve, eval and
// bench to the app. Each subcommand runs from its parse callback and reports
// failures by throwing crossmatch::Error.
void RegisterCommands(CLI::App& app);

}  // namespace crossmatch::cli

#endif  // CROSSMATCH_TOOLS_COMMANDS_H_
