import java.security.MessageDigest;

public class HashToken {
    public static void main(String[] args) {
        String algorithm = args[0];
        MessageDigest digest = MessageDigest.getInstance(algorithm);
        System.out.println("digest ready: " + digest.getAlgorithm());
    }
}
