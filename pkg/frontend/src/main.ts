import { createApp } from "./app.js";

const app = createApp(document);
void app.init();
