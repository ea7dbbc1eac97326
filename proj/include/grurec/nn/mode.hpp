#pragma once

namespace grurec {

/// Train mode uses batch statistics and random dropout masks; eval mode is
/// deterministic and treats every row independently.
enum class Mode { train, eval };

}  // namespace grurec
