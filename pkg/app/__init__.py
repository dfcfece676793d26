# PI Lab
