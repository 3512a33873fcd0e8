# Core numerics for the optomechanical sensing toolkit
