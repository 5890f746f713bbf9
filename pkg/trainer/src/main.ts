/** CLI entry point: train against a scenario given a JSON config file. */
import * as fs from "node:fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { EnvClient } from "./protocol.js";
import { DEFAULT_CONFIG, Trainer, type TrainerConfig } from "./train.js";

async function run(): Promise<number> {
  const args = await yargs(hideBin(process.argv))
    .option("config", { type: "string", demandOption: true, describe: "trainer config JSON" })
    .strict()
    .parse();
  const fileConfig = JSON.parse(fs.readFileSync(args.config, "utf-8"));
  const config: TrainerConfig = { ...DEFAULT_CONFIG, ...fileConfig };
  if (!config.scenarioPath || !config.outDir) {
    console.error("config must provide scenarioPath and outDir");
    return 1;
  }
  const client = new EnvClient(config.scenarioPath, config.simCommand);
  const trainer = new Trainer(config);
  try {
    await trainer.train(client, (m) => {
      console.log(
        `epoch ${m.epoch}: reward=${m.meanReward.toFixed(3)} ` +
          `policy=${m.policyLoss.toFixed(4)} value=${m.valueLoss.toFixed(4)} ` +
          `mu0=${m.mu0.toFixed(3)} mu1=${m.mu1.toFixed(3)}`,
      );
    });
  } finally {
    await client.close();
  }
  return 0;
}

run().then((code) => {
  process.exitCode = code;
});
