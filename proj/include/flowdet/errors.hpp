#pragma once

#include <stdexcept>
#include <string>

namespace flowdet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IngestError : public Error {
 public:
  enum class Kind {
    MissingLabelColumn,
    UnknownLabelValue,
    RaggedRow,
    MissingFeature,
    InsufficientRecords,
    TrainSizeExceedsCap,
  };
  IngestError(Kind kind, const std::string& what) : Error(what), kind(kind) {}
  Kind kind;
};

class SelectError : public Error {
 public:
  enum class Kind {
    DimensionMismatch,
    EmbedderFailure,
    NTooLarge,
    KTooLarge,
    DegenerateVector,
    BadIndexFile,
  };
  SelectError(Kind kind, const std::string& what) : Error(what), kind(kind) {}
  Kind kind;
};

class PromptError : public Error {
 public:
  enum class Kind { BadSeparator, BadInstruction, BadLayout, BadTemplateFile };
  PromptError(Kind kind, const std::string& what) : Error(what), kind(kind) {}
  Kind kind;
};

class ClientError : public Error {
 public:
  enum class Kind { Transport, Auth, Timeout, Sink, EmptyPool };
  ClientError(Kind kind, const std::string& what, int attempts = 0)
      : Error(what), kind(kind), attempts(attempts) {}
  Kind kind;
  int attempts;  // attempts made before giving up, 0 when not applicable
};

class MlpError : public Error {
 public:
  enum class Kind { NonNumericFeature, SingleClassPool, DivergedLoss, BadModelFile };
  MlpError(Kind kind, const std::string& what) : Error(what), kind(kind) {}
  Kind kind;
};

class HarnessError : public Error {
 public:
  enum class Kind { EmptyCases, Config };
  HarnessError(Kind kind, const std::string& what) : Error(what), kind(kind) {}
  Kind kind;
};

}  // namespace flowdet
