// The transformers backend is optional at runtime; this ambient declaration
// lets the project compile when the package is not installed.
declare module "@xenova/transformers";
